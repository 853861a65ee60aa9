#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "litmine/corpus.hpp"
#include "litmine/vocabulary.hpp"

namespace litmine::analysis {

using stage3::Field;
using stage3::FrameworkLabels;

/// One listener -> data type -> vis type -> purpose chain of a figure.
struct PathRecord {
    std::string paper_id;
    std::string base_figure_id;
    std::array<std::string, 4> stages;  // indexed by Field

    bool operator==(const PathRecord&) const = default;
};

nlohmann::json to_json(const PathRecord& path);

/// Cartesian product of the four label sets, in lexicographic order.
/// Throws InputError when any field is empty.
std::vector<PathRecord> expand_paths(const FrameworkLabels& labels);

/// One connection between labels of adjacent stages.
struct EdgeRecord {
    std::string paper_id;
    std::string base_figure_id;
    std::size_t from_stage = 0;  // edge joins stage from_stage and from_stage + 1
    std::string from;
    std::string to;
};

/// Edge-wise reading: every pair of labels in adjacent stages, counted once
/// per figure. Throws InputError when any field is empty.
std::vector<EdgeRecord> expand_edges(const FrameworkLabels& labels);

struct SankeyNode {
    std::size_t stage = 0;
    std::string category;
    std::size_t total = 0;
};

struct SankeyLink {
    std::size_t from_stage = 0;
    std::string source;
    std::string target;
    std::size_t count = 0;
};

struct Sankey {
    std::size_t path_count = 0;
    std::vector<SankeyNode> nodes;  // ordered by stage, then category
    std::vector<SankeyLink> links;  // ordered by stage, source, target

    const SankeyNode* node(std::size_t stage, std::string_view category) const;
    const SankeyLink* link(std::size_t from_stage, std::string_view source, std::string_view target) const;
};

nlohmann::json to_json(const Sankey& sankey);

/// Node totals per (stage, category) and link counts per adjacent pair.
/// Throws ContractError for an empty path list.
Sankey sankey_export(std::span<const PathRecord> paths);

/// Paper-level labels: the union of all figure labels of that paper.
struct PaperLabels {
    std::string paper_id;
    int year = 0;
    std::optional<std::int64_t> citation_count;
    std::array<std::set<std::string>, 4> values;  // indexed by Field

    const std::set<std::string>& of(Field f) const { return values[static_cast<std::size_t>(f)]; }
};

struct PaperLift {
    std::vector<PaperLabels> papers;  // sorted by paper_id
    std::vector<std::string> warnings;
};

/// Joins figure labels to paper metadata. Labels of papers missing from
/// `papers` are skipped with a warning.
PaperLift lift_to_papers(std::span<const FrameworkLabels> figures, const Corpus& papers);

struct YearRow {
    int year = 0;
    std::size_t papers = 0;
    std::map<std::string, double> proportion;  // category -> share of that year's papers
};

/// One row per year that has papers, ascending. Every category in
/// `categories` gets an entry. Throws InputError when a paper carries no
/// label in the field.
std::vector<YearRow> yearly_proportions(std::span<const PaperLabels> papers, Field field,
                                        std::span<const std::string> categories);

/// citations / (reference_year - year + 1). Throws InputError when year >
/// reference_year or citations < 0.
double citation_weight(std::int64_t citations, int year, int reference_year = 2026);

struct CoverageRow {
    std::string category;
    std::size_t carriers = 0;
    double prevalence = 0.0;      // carriers / all papers
    double weighted_share = 0.0;  // weight of carriers / weight of papers with counts
};

struct Coverage {
    Field field = Field::model_listener;
    std::size_t papers = 0;
    std::size_t weighted_papers = 0;
    double total_weight = 0.0;
    bool weighted_empty = false;  // no weight to share out; weighted_share left at 0
    std::vector<CoverageRow> rows;  // in `categories` order

    /// Rows by weighted share descending, prevalence and name breaking ties.
    std::vector<CoverageRow> ranked() const;
};

/// Prevalence over all papers; weighted share over papers with citation
/// counts only. Throws ContractError for an empty paper list.
Coverage weighted_coverage(std::span<const PaperLabels> papers, Field field, std::span<const std::string> categories,
                           int reference_year = 2026);

/// Everything the analyze command writes.
struct Exports {
    std::string sankey_json;
    std::string trends_csv;
    std::string weights_csv;
    std::string paths_jsonl;
    std::vector<std::string> warnings;
};

Exports build_exports(std::span<const FrameworkLabels> figures, const Corpus& papers,
                      const stage3::LabelVocabulary& vocab, int reference_year = 2026);

}  // namespace litmine::analysis
