#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "litmine/bm25.hpp"
#include "litmine/figctx.hpp"
#include "litmine/library.hpp"
#include "litmine/llm_gateway.hpp"

namespace litmine::stage2 {

struct Options {
    std::size_t k = 5;  // neighbour papers; 0 = zero-shot
    std::size_t max_figures = 3;
    std::size_t per_neighbor_positive = 2;
    std::size_t per_neighbor_negative = 2;
    std::size_t max_exemplars = 8;
    std::size_t threads = 1;
};

/// Up to k library papers most similar to the target by title+abstract
/// BM25, target excluded. Throws ContractError on an empty library.
std::vector<bm25::ScoredDoc> retrieve_neighbor_papers(const PaperRecord& target, const FigureLibrary& library,
                                                      std::size_t k = 5);

struct ExemplarFigure {
    std::string paper_id;
    std::string figure_id;
    bool relevant = false;
    std::string evidence;
};

struct FigureExemplarSet {
    std::vector<ExemplarFigure> positives;
    std::vector<ExemplarFigure> negatives;

    /// Alternating positive/negative, starting with a positive.
    std::vector<ExemplarFigure> ordered() const;
    std::size_t size() const { return positives.size() + negatives.size(); }
};

/// Takes up to per_neighbor_positive/negative explicitly judged figures from
/// each neighbour (neighbour rank order, then figure order) and caps the
/// total at max_exemplars by alternating classes, so both classes appear
/// whenever the neighbours have them. Unjudged figures are never used.
FigureExemplarSet sample_exemplars(std::span<const bm25::ScoredDoc> neighbors, const FigureLibrary& library,
                                   const Options& options = {});

struct RelevanceVerdict {
    std::string paper_id;
    std::string figure_id;
    std::string base_figure_id;
    bool relevant = false;
    double confidence = 0.0;
    std::string snippet;
    std::optional<llm::Role> suggested_role;  // as tagged by the model
    std::optional<llm::Role> role;            // set only on selected figures
    bool selected = false;
    bool withheld = false;  // backend failed; figure queued for retry
    bool malformed = false;
    std::string error;

    nlohmann::json to_json() const;
};

llm::PromptRequest relevance_request(const figctx::FigureEvidence& target, const FigureExemplarSet& exemplars);

/// Throws llm::BackendUnavailable when the backend cannot answer.
RelevanceVerdict classify_figure(const figctx::FigureEvidence& target, const FigureExemplarSet& exemplars,
                                 llm::Gateway& gateway);

/// At most `max` relevant figures: first the most confident figure for each
/// of the overview, performance and mechanism roles, then the remaining
/// slots by descending confidence; ties go to the earlier figure id.
/// Returned in figure order with `selected` set. No relevant figures -> empty.
std::vector<RelevanceVerdict> select_representatives(std::span<const RelevanceVerdict> verdicts,
                                                     std::size_t max = 3);

struct Result {
    std::vector<RelevanceVerdict> verdicts;        // every input figure, paper then figure order
    std::vector<std::string> retry;                // "paper_id#figure_id" of withheld figures
    std::vector<std::string> excluded_papers;      // no relevant figure, none withheld
    std::vector<std::string> warnings;
};

/// Classifies every figure of every paper, then selects representatives per
/// paper. Output does not depend on `options.threads`.
Result run_stage2(std::span<const PaperRecord> papers, std::span<const figctx::FigureEvidence> evidence,
                  const FigureLibrary& library, llm::Gateway& gateway, const Options& options = {});

}  // namespace litmine::stage2
