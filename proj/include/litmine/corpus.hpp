#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace litmine {

enum class Label { unlabeled, positive, negative };

std::string_view to_string(Label label);
/// Accepts "positive"/"negative"/"unlabeled" (and null as unlabeled).
Label parse_label(const nlohmann::json& value);

struct PaperRecord {
    std::string paper_id;
    std::string title;
    std::string abstract;
    std::vector<std::string> author_keywords;
    int year = 0;
    std::string venue;
    std::optional<std::int64_t> citation_count;  // absent => excluded from weighting
    Label label = Label::unlabeled;

    /// Title and abstract joined; the text every paper-level retrieval indexes.
    std::string title_abstract() const;

    bool operator==(const PaperRecord&) const = default;
};

nlohmann::json to_json(const PaperRecord& record);
/// Throws InputError when paper_id or title is missing, or a field has the wrong type.
PaperRecord paper_from_json(const nlohmann::json& j);

/// An ordered collection of papers with unique ids.
class Corpus {
  public:
    Corpus() = default;
    /// Throws InputError on duplicate ids.
    explicit Corpus(std::vector<PaperRecord> records);

    const std::vector<PaperRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const PaperRecord* find(std::string_view paper_id) const;
    bool contains(std::string_view paper_id) const { return find(paper_id) != nullptr; }

    /// Appends; returns false (and leaves the corpus untouched) if the id exists.
    bool add(PaperRecord record);

  private:
    std::vector<PaperRecord> records_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct IngestReport {
    std::size_t lines_read = 0;
    std::size_t accepted = 0;
    std::size_t dropped_duplicates = 0;
    std::size_t rejected = 0;  // hard per-record errors
    std::vector<std::string> warnings;
    std::vector<std::string> errors;

    nlohmann::json to_json() const;
};

struct IngestResult {
    Corpus corpus;
    IngestReport report;
};

/// Build a corpus from raw JSON records. Duplicate ids are dropped with a
/// warning (first occurrence wins); records without a paper_id or title, or
/// with a year outside [1990, reference_year], are rejected with an error.
IngestResult ingest_metadata(std::span<const nlohmann::json> raw, int reference_year = 2026);

/// Same, reading line-delimited JSON; unparseable lines count as rejected.
IngestResult ingest_metadata(std::istream& jsonl, int reference_year = 2026);

/// Keep records where any keyword occurs as a whole, case-insensitive word
/// token in the title, abstract, or author keywords. Throws ContractError on
/// an empty keyword list.
Corpus keyword_prefilter(const Corpus& corpus, std::span<const std::string> keywords);

struct LabelAssignment {
    std::string paper_id;
    Label label = Label::unlabeled;
};

/// Papers with a definite binary label: the few-shot example pool and the
/// evaluation reference.
class LabeledPool {
  public:
    LabeledPool() = default;

    const std::vector<PaperRecord>& records() const { return records_; }
    /// Indices into records().
    const std::vector<std::size_t>& positives() const { return positives_; }
    const std::vector<std::size_t>& negatives() const { return negatives_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const PaperRecord* find(std::string_view paper_id) const;
    bool is_positive(std::string_view paper_id) const;

    /// An empty pool is valid but cannot supply few-shot exemplars.
    bool fewshot_possible() const { return !positives_.empty() && !negatives_.empty(); }

    /// A copy of this pool without one paper (leave-one-out library).
    LabeledPool without(std::string_view paper_id) const;

  private:
    friend LabeledPool load_labeled_pool(const Corpus&, std::span<const LabelAssignment>);
    void push(PaperRecord record);

    std::vector<PaperRecord> records_;
    std::vector<std::size_t> positives_;
    std::vector<std::size_t> negatives_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Pool records are copies of the referenced corpus records with the assigned
/// label set. Throws InputError for unknown ids, non-binary labels, or
/// conflicting duplicate assignments (identical duplicates are ignored).
LabeledPool load_labeled_pool(const Corpus& corpus, std::span<const LabelAssignment> assignments);

/// Assignments from the labels already carried by corpus records.
std::vector<LabelAssignment> assignments_from_records(const Corpus& corpus);

/// Reads {"paper_id": ..., "label": "positive"|"negative"} lines.
std::vector<LabelAssignment> assignments_from_json(std::span<const nlohmann::json> lines);

}  // namespace litmine
