#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "litmine/bm25.hpp"
#include "litmine/corpus.hpp"
#include "litmine/library.hpp"
#include "litmine/llm_gateway.hpp"
#include "litmine/stage1.hpp"
#include "litmine/stage2.hpp"
#include "litmine/stage3.hpp"
#include "litmine/vocabulary.hpp"

namespace litmine::eval {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::optional<std::size_t> tn;  // undefined for figure-level scoring
    std::size_t fn = 0;

    /// Binary outcome; also counts TN.
    void add(bool truth, bool predicted);
    ConfusionCounts& operator+=(const ConfusionCounts& other);
    bool operator==(const ConfusionCounts&) const = default;
    nlohmann::json to_json() const;
};

/// A metric value; `flagged` marks a zero denominator (value reported as 0).
struct MetricValue {
    double value = 0.0;
    bool flagged = false;
};

MetricValue precision(const ConfusionCounts& c);
MetricValue recall(const ConfusionCounts& c);
/// 2TP / (2TP + FP + FN), the harmonic mean of precision and recall.
MetricValue f1(const ConfusionCounts& c);

/// TP = |Y ∩ Ŷ|, FP = |Ŷ \ Y|, FN = |Y \ Ŷ|. Throws ContractError when a value
/// is outside `vocabulary`.
ConfusionCounts multilabel_counts(const std::set<std::string>& truth, const std::set<std::string>& predicted,
                                  std::span<const std::string> vocabulary);

/// f1 over counts summed across all figures. Throws ContractError when empty.
MetricValue micro_f1(std::span<const ConfusionCounts> per_figure);

/// Majority label among the target's k nearest pool papers (ranking with
/// zero-score fill, target excluded); a tie predicts positive.
bool bm25_majority_baseline(const PaperRecord& target, const LabeledPool& pool, const bm25::Index& index,
                            std::size_t k, const bm25::TokenizerOptions& tokenizer = {});

/// What one fold retrieved, for leakage audits. Ids are paper ids.
struct FoldLog {
    int stage = 0;
    std::string method;
    std::string held_out;
    std::vector<std::string> retrieved;
    std::vector<std::string> exemplars;

    nlohmann::json to_json() const;
};

struct ReportRow {
    int stage = 0;
    std::string method;  // "majority vote", "0-shot", "6-shot", ...
    std::string model;   // backend id, "consensus", or "BM25"
    std::string target;  // reference set or label field
    ConfusionCounts counts;
    std::string metric;  // "precision", "F1", "micro-F1"
    MetricValue score;

    nlohmann::json to_json() const;
};

struct Report {
    std::vector<ReportRow> rows;
    std::vector<FoldLog> folds;
    std::vector<std::string> failures;

    const ReportRow* find(int stage, std::string_view method, std::string_view model, std::string_view target = {}) const;
    nlohmann::json to_json() const;
};

struct LooConfig {
    std::set<int> stages = {1, 2, 3};
    std::vector<std::size_t> stage1_shots = {0, 6};
    std::vector<std::size_t> stage2_shots = {0, 5};
    std::vector<std::size_t> stage3_shots = {0, 10};
    std::size_t baseline_k = 6;
    stage1::Options stage1;
    stage2::Options stage2;
    stage3::Options stage3;
    std::size_t threads = 1;
};

/// Leave-one-out over the labelled pool (stage 1) and the coded library
/// (stages 2 and 3): each fold holds one paper out and retrieves only from
/// the rest. Stage 1 uses every gateway singly plus their consensus; stages
/// 2 and 3 use the first gateway. Stage 2 scores explicitly judged figures;
/// stage 3 scores coded figures per field. Counts are summed over folds in
/// fold order, so the report does not depend on thread count. A failing fold
/// is recorded in `failures` and skipped.
Report run_loo(const LabeledPool* pool, const FigureLibrary* library, std::span<llm::Gateway* const> gateways,
               const stage3::LabelVocabulary& vocab, const LooConfig& config);

/// Descriptions of every fold whose held-out paper appears among its own
/// retrieval results or exemplars. Empty means no leakage.
std::vector<std::string> find_leakage(std::span<const FoldLog> folds);

}  // namespace litmine::eval
