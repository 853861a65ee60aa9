#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace litmine::bm25 {

/// Retrieval is lexical and transparent by default: no stopword removal and
/// no stemming. Both can be switched on.
struct TokenizerOptions {
    std::size_t min_length = 2;
    bool remove_stopwords = false;
    /// Harman "S" stemmer (plural stripping only).
    bool stem = false;
};

/// Lowercase tokens split on non-alphanumeric boundaries; tokens shorter than
/// `min_length` bytes are dropped.
std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& options = {});

struct TokenizedDoc {
    std::string doc_id;
    std::vector<std::string> tokens;

    std::size_t length() const { return tokens.size(); }
};

struct Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Ranking order: descending score, then ascending doc_id.
bool ranks_before(const ScoredDoc& a, const ScoredDoc& b);

/// Immutable Okapi BM25 index. Concurrent reads are safe.
///
/// score(q, d) = sum over query tokens t of
///     idf(t) * tf(t,d) * (k1 + 1) / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))
/// with idf(t) = ln((N - df(t) + 0.5) / (df(t) + 0.5) + 1), which is never
/// negative. Repeated query tokens contribute once per occurrence.
class Index {
  public:
    Index() = default;

    /// Throws ContractError on duplicate doc ids.
    static Index build(std::vector<TokenizedDoc> docs, Params params = {});

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_length_; }
    const Params& params() const { return params_; }
    std::size_t document_frequency(const std::string& term) const;
    double idf(const std::string& term) const;
    bool contains(std::string_view doc_id) const;
    std::size_t doc_length(std::string_view doc_id) const;
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }

    /// Throws ContractError for an unknown doc id.
    double score(std::span<const std::string> query, std::string_view doc_id) const;

    /// Up to k docs with positive score, in ranking order, skipping `exclude`.
    /// Throws ContractError when k == 0.
    std::vector<ScoredDoc> top_k(std::span<const std::string> query, std::size_t k,
                                 const std::set<std::string>& exclude = {}) const;

    /// Every non-excluded doc: positive-score docs in ranking order, then
    /// zero-score docs by ascending doc_id.
    std::vector<ScoredDoc> full_ranking(std::span<const std::string> query,
                                        const std::set<std::string>& exclude = {}) const;

    /// Debug dump: statistics, doc lengths and postings.
    nlohmann::json dump() const;

  private:
    struct Posting {
        std::size_t doc = 0;
        std::size_t tf = 0;
    };

    std::vector<double> accumulate(std::span<const std::string> query) const;
    double term_weight(double idf, std::size_t tf, std::size_t doc_length) const;

    Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::size_t> lengths_;
    std::unordered_map<std::string, std::size_t> doc_index_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_length_ = 0.0;
};

}  // namespace litmine::bm25
