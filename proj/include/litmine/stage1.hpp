#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "litmine/bm25.hpp"
#include "litmine/corpus.hpp"
#include "litmine/llm_gateway.hpp"

namespace litmine::stage1 {

struct Options {
    std::size_t k = 6;
    std::size_t min_pos = 2;
    std::size_t min_neg = 2;
    std::size_t threads = 1;
    bm25::TokenizerOptions tokenizer;
};

/// BM25 index over the pool's title+abstract text, keyed by paper_id.
bm25::Index build_pool_index(const LabeledPool& pool, const bm25::TokenizerOptions& tokenizer = {});

struct FewShotExemplar {
    std::string paper_id;
    bool positive = false;
    double score = 0.0;

    bool operator==(const FewShotExemplar&) const = default;
};

struct FewShotContext {
    std::vector<FewShotExemplar> exemplars;  // ranking order

    std::size_t positives() const;
    std::size_t negatives() const;
    bool contains(std::string_view paper_id) const;
};

/// Top-k BM25 neighbours of the target among pool papers (the target itself
/// is never retrieved). If a class falls below its minimum, the lowest-ranked
/// members of the other class are swapped for the best-ranked members of the
/// missing class. Result stays in ranking order. k = 0 gives an empty
/// (zero-shot) context. Throws ContractError if the pool, minus the target,
/// cannot satisfy the minimums or min_pos + min_neg > k.
FewShotContext build_fewshot_context(const PaperRecord& target, const LabeledPool& pool,
                                     const bm25::Index& index, const Options& options);

/// "Title: ...\nAbstract: ..." as shown to the model.
std::string paper_evidence(const PaperRecord& paper);

llm::PromptRequest screening_request(const PaperRecord& target, const FewShotContext& context,
                                     const LabeledPool& pool);

enum class Decision { positive, negative, undecided };
std::string_view to_string(Decision d);

struct ScreeningResult {
    Decision decision = Decision::undecided;
    std::vector<llm::ModelVerdict> verdicts;  // one per backend that answered
    std::vector<std::string> errors;          // one per backend that failed
    std::string prompt_hash;
};

/// Sends the same request to every gateway; positive only by consensus of
/// all of them. Any backend failure leaves the paper undecided.
ScreeningResult screen_paper(const PaperRecord& target, const FewShotContext& context, const LabeledPool& pool,
                             std::span<llm::Gateway* const> gateways);

struct DecisionLogEntry {
    std::string paper_id;
    std::string source;  // "pool" (label passed through) or "screened"
    Decision decision = Decision::undecided;
    std::vector<llm::ModelVerdict> verdicts;
    std::vector<FewShotExemplar> neighbors;
    std::string prompt_hash;
    std::vector<std::string> errors;

    nlohmann::json to_json() const;
};

struct Result {
    std::vector<PaperRecord> modelvis;  // candidate order, then pool-only positives
    std::vector<DecisionLogEntry> log;  // candidate order, then pool-only positives
    std::vector<std::string> retry;     // undecided paper ids
};

/// Screens every unlabeled candidate. Pool positives are always part of the
/// output; pool negatives among the candidates are passed through as
/// negative. Requires at least two gateways. Output is independent of
/// `options.threads`.
Result run_stage1(const Corpus& candidates, const LabeledPool& pool, std::span<llm::Gateway* const> gateways,
                  const Options& options);

}  // namespace litmine::stage1
