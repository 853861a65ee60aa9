#include "litmine/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "litmine/error.hpp"
#include "litmine/text.hpp"

namespace litmine::bm25 {

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",     "an",    "and",  "are",   "as",    "at",   "be",    "by",   "for",
        "from",  "has",   "have", "in",    "into",  "is",   "it",    "its",  "of",
        "on",    "or",    "that", "the",   "their", "then", "there", "these", "this",
        "to",    "was",   "we",   "were",  "which", "with", "our",   "can",  "also",
        "such",  "than",  "they", "not",   "but",   "how",  "both",  "each", "between"};
    return words;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string s_stem(std::string w) {
    if (ends_with(w, "ies") && !ends_with(w, "eies") && !ends_with(w, "aies")) {
        w.replace(w.size() - 3, 3, "y");
    } else if (ends_with(w, "es") && !ends_with(w, "aes") && !ends_with(w, "ees") &&
               !ends_with(w, "oes")) {
        w.pop_back();
    } else if (ends_with(w, "s") && !ends_with(w, "us") && !ends_with(w, "ss")) {
        w.pop_back();
    }
    return w;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& options) {
    std::vector<std::string> out;
    for (auto& w : text::words(text)) {
        if (w.size() < options.min_length) continue;
        if (options.remove_stopwords && stopwords().contains(w)) continue;
        if (options.stem) w = s_stem(std::move(w));
        if (w.empty()) continue;
        out.push_back(std::move(w));
    }
    return out;
}

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

Index Index::build(std::vector<TokenizedDoc> docs, Params params) {
    Index idx;
    idx.params_ = params;
    std::size_t total = 0;
    for (auto& d : docs) {
        auto pos = idx.doc_ids_.size();
        if (!idx.doc_index_.emplace(d.doc_id, pos).second)
            throw ContractError("bm25: duplicate doc_id " + d.doc_id);
        std::map<std::string, std::size_t> tf;
        for (const auto& t : d.tokens) {
            if (t.empty()) throw ContractError("bm25: empty token in " + d.doc_id);
            ++tf[t];
        }
        for (auto& [term, count] : tf) idx.postings_[term].push_back({pos, count});
        idx.lengths_.push_back(d.length());
        total += d.length();
        idx.doc_ids_.push_back(std::move(d.doc_id));
    }
    idx.avg_length_ =
        idx.doc_ids_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(idx.doc_ids_.size());
    return idx;
}

std::size_t Index::document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

double Index::idf(const std::string& term) const {
    auto n = static_cast<double>(doc_count());
    auto df = static_cast<double>(document_frequency(term));
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

bool Index::contains(std::string_view doc_id) const {
    return doc_index_.contains(std::string(doc_id));
}

std::size_t Index::doc_length(std::string_view doc_id) const {
    auto it = doc_index_.find(std::string(doc_id));
    if (it == doc_index_.end()) throw ContractError("bm25: unknown doc_id " + std::string(doc_id));
    return lengths_[it->second];
}

double Index::term_weight(double idf, std::size_t tf, std::size_t doc_length) const {
    auto f = static_cast<double>(tf);
    double norm = 1.0 - params_.b + params_.b * static_cast<double>(doc_length) / avg_length_;
    return idf * f * (params_.k1 + 1.0) / (f + params_.k1 * norm);
}

std::vector<double> Index::accumulate(std::span<const std::string> query) const {
    std::vector<double> scores(doc_ids_.size(), 0.0);
    for (const auto& term : query) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        double w = idf(term);
        for (const auto& p : it->second) scores[p.doc] += term_weight(w, p.tf, lengths_[p.doc]);
    }
    return scores;
}

double Index::score(std::span<const std::string> query, std::string_view doc_id) const {
    auto it = doc_index_.find(std::string(doc_id));
    if (it == doc_index_.end()) throw ContractError("bm25: unknown doc_id " + std::string(doc_id));
    double total = 0.0;
    for (const auto& term : query) {
        auto pit = postings_.find(term);
        if (pit == postings_.end()) continue;
        for (const auto& p : pit->second)
            if (p.doc == it->second) total += term_weight(idf(term), p.tf, lengths_[p.doc]);
    }
    return total;
}

std::vector<ScoredDoc> Index::top_k(std::span<const std::string> query, std::size_t k,
                                    const std::set<std::string>& exclude) const {
    if (k == 0) throw ContractError("bm25: top_k requires k >= 1");
    auto scores = accumulate(query);
    std::vector<ScoredDoc> hits;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] > 0.0 && !exclude.contains(doc_ids_[i]))
            hits.push_back({doc_ids_[i], scores[i]});
    auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      ranks_before);
    hits.resize(keep);
    return hits;
}

std::vector<ScoredDoc> Index::full_ranking(std::span<const std::string> query,
                                           const std::set<std::string>& exclude) const {
    auto scores = accumulate(query);
    std::vector<ScoredDoc> all;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!exclude.contains(doc_ids_[i])) all.push_back({doc_ids_[i], scores[i]});
    std::sort(all.begin(), all.end(), ranks_before);
    return all;
}

nlohmann::json Index::dump() const {
    nlohmann::json docs = nlohmann::json::object();
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) docs[doc_ids_[i]] = lengths_[i];
    std::map<std::string, nlohmann::json> terms;
    for (const auto& [term, plist] : postings_) {
        auto arr = nlohmann::json::array();
        for (const auto& p : plist) arr.push_back({doc_ids_[p.doc], p.tf});
        terms.emplace(term, std::move(arr));
    }
    return {{"k1", params_.k1}, {"b", params_.b}, {"doc_count", doc_count()},
            {"avg_doc_length", avg_length_}, {"doc_lengths", docs}, {"postings", terms}};
}

}  // namespace litmine::bm25
