#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "litmine/bm25.hpp"
#include "litmine/figctx.hpp"
#include "litmine/library.hpp"
#include "litmine/llm_gateway.hpp"
#include "litmine/vocabulary.hpp"

namespace litmine::stage3 {

struct Options {
    std::size_t k = 10;  // exemplar figures; 0 = zero-shot
    std::size_t per_paper_cap = 3;
    std::size_t caption_repeats = 3;
    std::size_t threads = 1;
    NormalizeOptions normalize;
    bm25::TokenizerOptions tokenizer;
};

/// Index tokens for a figure: the caption's tokens `caption_repeats` times,
/// then the context's tokens. Used for both indexing and querying.
std::vector<std::string> figure_tokens(const figctx::FigureEvidence& figure, std::size_t caption_repeats = 3,
                                       const bm25::TokenizerOptions& tokenizer = {});

struct FigureDoc {
    std::string doc_id;  // "paper_id#figure_id"
    figctx::FigureEvidence evidence;
    FrameworkLabels labels;
};

struct FigureCorpus {
    bm25::Index index;
    std::vector<FigureDoc> docs;
    std::vector<std::string> warnings;
    std::unordered_map<std::string, std::size_t> positions;  // doc_id -> index into docs

    const FigureDoc* find(std::string_view doc_id) const;
};

struct LabeledEvidence {
    figctx::FigureEvidence evidence;
    FrameworkLabels labels;
};

/// Figure-level BM25 corpus with caption upweighting. Figures without a
/// caption are skipped with a warning.
FigureCorpus build_figure_corpus(std::span<const LabeledEvidence> figures, const Options& options = {});
/// Every coded (labelled) figure of the library.
FigureCorpus build_figure_corpus(const FigureLibrary& library, const Options& options = {});

struct FigureHit {
    std::string doc_id;
    std::string paper_id;
    std::string figure_id;
    double score = 0.0;

    bool operator==(const FigureHit&) const = default;
};

/// Top-k figures by BM25 with at most `per_paper_cap` from any one source
/// paper; figures of `exclude_paper` are never returned.
std::vector<FigureHit> retrieve_similar_figures(const figctx::FigureEvidence& target, const FigureCorpus& corpus,
                                                std::size_t k = 10, std::size_t per_paper_cap = 3,
                                                const std::optional<std::string>& exclude_paper = std::nullopt,
                                                const Options& options = {});

/// Gold labels as shown to the model: values only.
nlohmann::json exemplar_payload(const FrameworkLabels& labels);

llm::PromptRequest extraction_request(const figctx::FigureEvidence& target, std::span<const FigureHit> exemplars,
                                      const FigureCorpus& corpus);

/// Raw payload from the backend; a reply without a JSON object yields {}.
/// Throws llm::BackendUnavailable.
nlohmann::json extract_labels(const figctx::FigureEvidence& target, std::span<const FigureHit> exemplars,
                              const FigureCorpus& corpus, llm::Gateway& gateway);

struct FigureOutcome {
    figctx::FigureEvidence target;
    std::vector<FigureHit> exemplars;
    std::optional<FrameworkLabels> labels;  // empty when withheld
    std::string error;
};

struct Result {
    std::vector<FigureOutcome> figures;     // input order
    std::vector<FrameworkLabels> labels;    // aggregated per base figure
    std::vector<std::string> retry;         // "paper_id#figure_id"
};

/// Retrieve -> extract -> normalize for every target, then aggregate
/// sub-figures per base figure. Each target's own paper is excluded from
/// its retrieval. Output does not depend on `options.threads`.
Result run_stage3(std::span<const figctx::FigureEvidence> targets, const FigureCorpus& corpus, llm::Gateway& gateway,
                  const LabelVocabulary& vocab, const Options& options = {});

}  // namespace litmine::stage3
