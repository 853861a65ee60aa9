#include "litmine/stage1.hpp"

#include <algorithm>
#include <unordered_map>

#include "litmine/error.hpp"
#include "litmine/parallel.hpp"

namespace litmine::stage1 {

using nlohmann::json;

bm25::Index build_pool_index(const LabeledPool& pool, const bm25::TokenizerOptions& tokenizer) {
    std::vector<bm25::TokenizedDoc> docs;
    docs.reserve(pool.size());
    for (const auto& r : pool.records()) docs.push_back({r.paper_id, bm25::tokenize(r.title_abstract(), tokenizer)});
    return bm25::Index::build(std::move(docs));
}

std::size_t FewShotContext::positives() const {
    return static_cast<std::size_t>(
        std::count_if(exemplars.begin(), exemplars.end(), [](const auto& e) { return e.positive; }));
}

std::size_t FewShotContext::negatives() const { return exemplars.size() - positives(); }

bool FewShotContext::contains(std::string_view paper_id) const {
    return std::any_of(exemplars.begin(), exemplars.end(), [&](const auto& e) { return e.paper_id == paper_id; });
}

FewShotContext build_fewshot_context(const PaperRecord& target, const LabeledPool& pool, const bm25::Index& index,
                                     const Options& options) {
    if (options.min_pos + options.min_neg > options.k)
        throw ContractError("few-shot minimums exceed k");
    FewShotContext ctx;
    if (options.k == 0) return ctx;

    auto query = bm25::tokenize(target.title_abstract(), options.tokenizer);
    auto ranking = index.full_ranking(query, {target.paper_id});
    std::vector<FewShotExemplar> ranked;
    ranked.reserve(ranking.size());
    for (const auto& doc : ranking) {
        const auto* rec = pool.find(doc.doc_id);
        if (!rec) throw ContractError("index document " + doc.doc_id + " is not in the pool");
        ranked.push_back({doc.doc_id, rec->label == Label::positive, doc.score});
    }
    auto available_pos = static_cast<std::size_t>(
        std::count_if(ranked.begin(), ranked.end(), [](const auto& e) { return e.positive; }));
    if (available_pos < options.min_pos || ranked.size() - available_pos < options.min_neg)
        throw ContractError("pool too small for few-shot constraints (" + std::to_string(available_pos) +
                            " positive, " + std::to_string(ranked.size() - available_pos) + " negative available)");

    // positions into `ranked`; ranked order is the final order
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < ranked.size() && chosen.size() < options.k; ++i) chosen.push_back(i);

    auto count = [&](bool positive) {
        return static_cast<std::size_t>(std::count_if(chosen.begin(), chosen.end(),
                                                      [&](std::size_t i) { return ranked[i].positive == positive; }));
    };
    auto rebalance = [&](bool missing_class, std::size_t minimum) {
        std::size_t next = chosen.empty() ? 0 : chosen.back() + 1;
        while (count(missing_class) < minimum) {
            while (next < ranked.size() && ranked[next].positive != missing_class) ++next;
            // guaranteed by the availability check above
            if (next >= ranked.size()) throw ContractError("few-shot rebalancing ran out of candidates");
            if (chosen.size() >= options.k) {
                auto victim = std::find_if(chosen.rbegin(), chosen.rend(),
                                           [&](std::size_t i) { return ranked[i].positive != missing_class; });
                chosen.erase(std::next(victim).base());
            }
            chosen.push_back(next++);
        }
    };
    rebalance(true, options.min_pos);
    rebalance(false, options.min_neg);
    std::sort(chosen.begin(), chosen.end());

    for (auto i : chosen) ctx.exemplars.push_back(ranked[i]);
    return ctx;
}

std::string paper_evidence(const PaperRecord& paper) {
    return "Title: " + paper.title + "\nAbstract: " + paper.abstract;
}

llm::PromptRequest screening_request(const PaperRecord& target, const FewShotContext& context,
                                     const LabeledPool& pool) {
    std::vector<llm::Exemplar> exemplars;
    for (const auto& e : context.exemplars) {
        if (e.paper_id == target.paper_id) throw ContractError("target " + target.paper_id + " among its exemplars");
        const auto* rec = pool.find(e.paper_id);
        if (!rec) throw ContractError("exemplar " + e.paper_id + " is not in the pool");
        exemplars.push_back({e.paper_id, paper_evidence(*rec), json{{"relevant", e.positive}}});
    }
    return llm::PromptRequest::make(llm::kScreeningSchema, std::move(exemplars), target.paper_id,
                                    paper_evidence(target));
}

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::positive: return "positive";
        case Decision::negative: return "negative";
        case Decision::undecided: break;
    }
    return "undecided";
}

ScreeningResult screen_paper(const PaperRecord& target, const FewShotContext& context, const LabeledPool& pool,
                             std::span<llm::Gateway* const> gateways) {
    if (gateways.empty()) throw ContractError("screen_paper: no backends");
    auto request = screening_request(target, context, pool);
    ScreeningResult result;
    result.prompt_hash = request.content_hash();
    for (auto* g : gateways) {
        try {
            result.verdicts.push_back(llm::parse_verdict(g->complete(request), g->id()));
        } catch (const llm::BackendUnavailable& e) {
            result.errors.push_back(e.what());
        }
    }
    if (!result.errors.empty())
        result.decision = Decision::undecided;
    else
        result.decision = llm::consensus(result.verdicts) ? Decision::positive : Decision::negative;
    return result;
}

namespace {

json verdict_json(const llm::ModelVerdict& v) {
    json j = {{"backend", v.backend}, {"relevant", v.positive}, {"confidence", v.confidence}, {"evidence", v.evidence}};
    if (v.malformed) j["malformed"] = true;
    return j;
}

}  // namespace

json DecisionLogEntry::to_json() const {
    json verdicts_json = json::array();
    for (const auto& v : verdicts) verdicts_json.push_back(verdict_json(v));
    json neighbors_json = json::array();
    for (const auto& n : neighbors)
        neighbors_json.push_back({{"paper_id", n.paper_id}, {"positive", n.positive}, {"score", n.score}});
    return {{"paper_id", paper_id}, {"source", source},       {"decision", to_string(decision)},
            {"verdicts", verdicts_json}, {"neighbors", neighbors_json}, {"prompt_hash", prompt_hash},
            {"errors", errors}};
}

Result run_stage1(const Corpus& candidates, const LabeledPool& pool, std::span<llm::Gateway* const> gateways,
                  const Options& options) {
    if (gateways.size() < 2) throw ContractError("stage 1 needs at least two backends for consensus");
    auto index = build_pool_index(pool, options.tokenizer);
    const auto& records = candidates.records();

    std::vector<DecisionLogEntry> entries(records.size());
    parallel_for(records.size(), options.threads, [&](std::size_t i) {
        const auto& paper = records[i];
        auto& entry = entries[i];
        entry.paper_id = paper.paper_id;
        if (const auto* labeled = pool.find(paper.paper_id)) {
            entry.source = "pool";
            entry.decision = labeled->label == Label::positive ? Decision::positive : Decision::negative;
            return;
        }
        entry.source = "screened";
        try {
            auto context = build_fewshot_context(paper, pool, index, options);
            entry.neighbors = context.exemplars;
            auto screened = screen_paper(paper, context, pool, gateways);
            entry.decision = screened.decision;
            entry.verdicts = std::move(screened.verdicts);
            entry.errors = std::move(screened.errors);
            entry.prompt_hash = std::move(screened.prompt_hash);
        } catch (const Error& e) {
            entry.decision = Decision::undecided;
            entry.errors.push_back(e.what());
        }
    });

    Result result;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (entries[i].decision == Decision::positive) {
            const auto* labeled = pool.find(records[i].paper_id);
            result.modelvis.push_back(labeled ? *labeled : records[i]);
        }
        if (entries[i].decision == Decision::undecided) result.retry.push_back(records[i].paper_id);
    }
    for (auto idx : pool.positives()) {
        const auto& p = pool.records()[idx];
        if (candidates.contains(p.paper_id)) continue;
        result.modelvis.push_back(p);
        entries.push_back({p.paper_id, "pool", Decision::positive, {}, {}, {}, {}});
    }
    result.log = std::move(entries);
    return result;
}

}  // namespace litmine::stage1
