#include "litmine/corpus.hpp"

#include <algorithm>
#include <istream>
#include <unordered_set>

#include "litmine/error.hpp"
#include "litmine/io.hpp"
#include "litmine/text.hpp"

namespace litmine {

using nlohmann::json;

std::string_view to_string(Label label) {
    switch (label) {
        case Label::positive: return "positive";
        case Label::negative: return "negative";
        case Label::unlabeled: break;
    }
    return "unlabeled";
}

Label parse_label(const json& value) {
    if (value.is_null()) return Label::unlabeled;
    if (value.is_boolean()) return value.get<bool>() ? Label::positive : Label::negative;
    if (!value.is_string()) throw InputError("label must be a string");
    auto s = text::squash(value.get<std::string>());
    if (s == "positive") return Label::positive;
    if (s == "negative") return Label::negative;
    if (s == "unlabeled" || s.empty()) return Label::unlabeled;
    throw InputError("unknown label '" + s + "'");
}

std::string PaperRecord::title_abstract() const {
    if (abstract.empty()) return title;
    return title + "\n" + abstract;
}

json to_json(const PaperRecord& r) {
    json j = {{"paper_id", r.paper_id},
              {"title", r.title},
              {"abstract", r.abstract},
              {"author_keywords", r.author_keywords},
              {"year", r.year},
              {"venue", r.venue}};
    j["citation_count"] = r.citation_count ? json(*r.citation_count) : json(nullptr);
    j["label"] = r.label == Label::unlabeled ? json(nullptr) : json(to_string(r.label));
    return j;
}

namespace {

std::string string_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) throw InputError(std::string(key) + " must be a string");
    return it->get<std::string>();
}

int year_field(const json& j) {
    auto it = j.find("year");
    if (it == j.end() || it->is_null()) throw InputError("missing year");
    if (it->is_number_integer()) return it->get<int>();
    if (it->is_string()) {
        try {
            return std::stoi(it->get<std::string>());
        } catch (const std::exception&) {
        }
    }
    throw InputError("year must be an integer");
}

}  // namespace

PaperRecord paper_from_json(const json& j) {
    if (!j.is_object()) throw InputError("record is not a JSON object");
    PaperRecord r;
    r.paper_id = string_field(j, "paper_id");
    if (r.paper_id.empty()) throw InputError("missing paper_id");
    r.title = string_field(j, "title");
    if (r.title.empty()) throw InputError("record " + r.paper_id + ": missing title");
    r.abstract = string_field(j, "abstract");
    r.venue = string_field(j, "venue");
    r.year = year_field(j);
    if (auto it = j.find("author_keywords"); it != j.end() && !it->is_null()) {
        if (it->is_array()) {
            for (const auto& k : *it) r.author_keywords.push_back(k.get<std::string>());
        } else if (it->is_string()) {
            // VisPubData-style "a, b; c" strings
            auto s = it->get<std::string>();
            std::replace(s.begin(), s.end(), ';', ',');
            for (const auto& k : text::split(s, ','))
                if (auto t = text::trim(k); !t.empty()) r.author_keywords.emplace_back(t);
        } else {
            throw InputError("author_keywords must be a list or string");
        }
    }
    if (auto it = j.find("citation_count"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw InputError("citation_count must be an integer");
        auto c = it->get<std::int64_t>();
        if (c < 0) throw InputError("record " + r.paper_id + ": negative citation_count");
        r.citation_count = c;
    }
    if (auto it = j.find("label"); it != j.end()) r.label = parse_label(*it);
    return r;
}

Corpus::Corpus(std::vector<PaperRecord> records) {
    records_.reserve(records.size());
    for (auto& r : records) {
        auto id = r.paper_id;
        if (!add(std::move(r))) throw InputError("duplicate paper_id " + id);
    }
}

const PaperRecord* Corpus::find(std::string_view paper_id) const {
    auto it = by_id_.find(std::string(paper_id));
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

bool Corpus::add(PaperRecord record) {
    auto [it, inserted] = by_id_.emplace(record.paper_id, records_.size());
    if (!inserted) return false;
    records_.push_back(std::move(record));
    return true;
}

json IngestReport::to_json() const {
    return {{"lines_read", lines_read}, {"accepted", accepted},
            {"dropped_duplicates", dropped_duplicates}, {"rejected", rejected},
            {"warnings", warnings}, {"errors", errors}};
}

namespace {

void ingest_one(const json& raw, std::size_t position, int reference_year, IngestResult& out) {
    auto where = "record " + std::to_string(position);
    PaperRecord record;
    try {
        record = paper_from_json(raw);
        if (record.year < 1990 || record.year > reference_year)
            throw InputError("record " + record.paper_id + ": year " +
                             std::to_string(record.year) + " outside [1990, " +
                             std::to_string(reference_year) + "]");
    } catch (const std::exception& e) {
        ++out.report.rejected;
        out.report.errors.push_back(where + ": " + e.what());
        return;
    }
    auto id = record.paper_id;
    if (!out.corpus.add(std::move(record))) {
        ++out.report.dropped_duplicates;
        out.report.warnings.push_back(where + ": duplicate paper_id " + id + " dropped");
        return;
    }
    ++out.report.accepted;
}

}  // namespace

IngestResult ingest_metadata(std::span<const json> raw, int reference_year) {
    IngestResult out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        ++out.report.lines_read;
        ingest_one(raw[i], i + 1, reference_year, out);
    }
    return out;
}

IngestResult ingest_metadata(std::istream& jsonl, int reference_year) {
    IngestResult out;
    for (const auto& line : io::parse_jsonl(jsonl)) {
        ++out.report.lines_read;
        if (!line.error.empty()) {
            ++out.report.rejected;
            out.report.errors.push_back("line " + std::to_string(line.line_number) + ": " +
                                        line.error);
            continue;
        }
        ingest_one(line.value, line.line_number, reference_year, out);
    }
    return out;
}

Corpus keyword_prefilter(const Corpus& corpus, std::span<const std::string> keywords) {
    if (keywords.empty()) throw ContractError("keyword_prefilter: keyword list is empty");
    std::unordered_set<std::string> wanted;
    for (const auto& k : keywords) wanted.insert(text::to_lower(text::trim(k)));

    auto hits = [&](std::string_view field) {
        for (const auto& w : text::words(field))
            if (wanted.contains(w)) return true;
        return false;
    };
    Corpus out;
    for (const auto& r : corpus.records()) {
        bool keep = hits(r.title) || hits(r.abstract) ||
                    std::any_of(r.author_keywords.begin(), r.author_keywords.end(), hits);
        if (keep) out.add(r);
    }
    return out;
}

const PaperRecord* LabeledPool::find(std::string_view paper_id) const {
    auto it = by_id_.find(std::string(paper_id));
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

bool LabeledPool::is_positive(std::string_view paper_id) const {
    const auto* r = find(paper_id);
    return r && r->label == Label::positive;
}

void LabeledPool::push(PaperRecord record) {
    auto idx = records_.size();
    by_id_.emplace(record.paper_id, idx);
    (record.label == Label::positive ? positives_ : negatives_).push_back(idx);
    records_.push_back(std::move(record));
}

LabeledPool LabeledPool::without(std::string_view paper_id) const {
    LabeledPool out;
    for (const auto& r : records_)
        if (r.paper_id != paper_id) out.push(r);
    return out;
}

LabeledPool load_labeled_pool(const Corpus& corpus, std::span<const LabelAssignment> assignments) {
    std::unordered_map<std::string, Label> seen;
    LabeledPool pool;
    for (const auto& a : assignments) {
        if (a.label == Label::unlabeled)
            throw InputError("assignment for " + a.paper_id + " is not a binary label");
        const auto* record = corpus.find(a.paper_id);
        if (!record) throw InputError("assignment references unknown paper_id " + a.paper_id);
        auto [it, inserted] = seen.emplace(a.paper_id, a.label);
        if (!inserted) {
            if (it->second != a.label)
                throw InputError("conflicting label assignments for " + a.paper_id);
            continue;
        }
        auto copy = *record;
        copy.label = a.label;
        pool.push(std::move(copy));
    }
    return pool;
}

std::vector<LabelAssignment> assignments_from_records(const Corpus& corpus) {
    std::vector<LabelAssignment> out;
    for (const auto& r : corpus.records())
        if (r.label != Label::unlabeled) out.push_back({r.paper_id, r.label});
    return out;
}

std::vector<LabelAssignment> assignments_from_json(std::span<const json> lines) {
    std::vector<LabelAssignment> out;
    out.reserve(lines.size());
    for (const auto& j : lines) {
        auto id = string_field(j, "paper_id");
        if (id.empty()) throw InputError("label assignment without paper_id");
        auto it = j.find("label");
        if (it == j.end()) throw InputError("label assignment for " + id + " has no label");
        out.push_back({std::move(id), parse_label(*it)});
    }
    return out;
}

}  // namespace litmine
