#include "litmine/eval.hpp"

#include <algorithm>
#include <map>

#include "litmine/error.hpp"
#include "litmine/parallel.hpp"

namespace litmine::eval {

using nlohmann::json;

void ConfusionCounts::add(bool truth, bool predicted) {
    if (truth && predicted) ++tp;
    if (!truth && predicted) ++fp;
    if (truth && !predicted) ++fn;
    if (!truth && !predicted) tn = tn.value_or(0) + 1;
    if (!tn) tn = 0;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    if (tn || o.tn) tn = tn.value_or(0) + o.tn.value_or(0);
    return *this;
}

json ConfusionCounts::to_json() const {
    return {{"tp", tp}, {"fp", fp}, {"tn", tn ? json(*tn) : json(nullptr)}, {"fn", fn}};
}

namespace {

MetricValue ratio(std::size_t num, std::size_t den) {
    if (den == 0) return {0.0, true};
    return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

MetricValue precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }

MetricValue recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

MetricValue f1(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }

ConfusionCounts multilabel_counts(const std::set<std::string>& truth, const std::set<std::string>& predicted,
                                  std::span<const std::string> vocabulary) {
    auto check = [&](const std::set<std::string>& s) {
        for (const auto& v : s)
            if (std::find(vocabulary.begin(), vocabulary.end(), v) == vocabulary.end())
                throw ContractError("label '" + v + "' is not in the field vocabulary");
    };
    check(truth);
    check(predicted);
    ConfusionCounts c;
    for (const auto& v : predicted) (truth.contains(v) ? c.tp : c.fp)++;
    for (const auto& v : truth)
        if (!predicted.contains(v)) ++c.fn;
    return c;
}

MetricValue micro_f1(std::span<const ConfusionCounts> per_figure) {
    if (per_figure.empty()) throw ContractError("micro_f1: no figures");
    ConfusionCounts total;
    for (const auto& c : per_figure) {
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
    }
    return f1(total);
}

bool bm25_majority_baseline(const PaperRecord& target, const LabeledPool& pool, const bm25::Index& index,
                            std::size_t k, const bm25::TokenizerOptions& tokenizer) {
    if (pool.empty()) throw ContractError("baseline: empty pool");
    auto ranking = index.full_ranking(bm25::tokenize(target.title_abstract(), tokenizer), {target.paper_id});
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) (pool.is_positive(ranking[i].doc_id) ? pos : neg)++;
    return pos >= neg;
}

json FoldLog::to_json() const {
    return {{"stage", stage}, {"method", method}, {"held_out", held_out}, {"retrieved", retrieved}, {"exemplars", exemplars}};
}

json ReportRow::to_json() const {
    return {{"stage", stage},   {"method", method},        {"model", model},
            {"target", target}, {"counts", counts.to_json()}, {"metric", metric},
            {"score", score.value}, {"flagged", score.flagged}};
}

const ReportRow* Report::find(int stage, std::string_view method, std::string_view model, std::string_view target) const {
    for (const auto& r : rows)
        if (r.stage == stage && r.method == method && r.model == model && (target.empty() || r.target == target))
            return &r;
    return nullptr;
}

json Report::to_json() const {
    json r = json::array();
    for (const auto& row : rows) r.push_back(row.to_json());
    json f = json::array();
    for (const auto& fold : folds) f.push_back(fold.to_json());
    return {{"rows", r}, {"folds", f}, {"failures", failures}};
}

namespace {

// Counts for one (method, model, target) key, accumulated in fold order.
struct Tally {
    std::vector<std::tuple<std::string, std::string, std::string>> order;
    std::map<std::tuple<std::string, std::string, std::string>, ConfusionCounts> counts;

    ConfusionCounts& at(const std::string& method, const std::string& model, const std::string& target) {
        auto key = std::make_tuple(method, model, target);
        auto [it, inserted] = counts.try_emplace(key);
        if (inserted) order.push_back(key);
        return it->second;
    }
    void merge(const Tally& other) {
        for (const auto& key : other.order) at(std::get<0>(key), std::get<1>(key), std::get<2>(key)) += other.counts.at(key);
    }
};

struct FoldResult {
    Tally tally;
    std::vector<FoldLog> logs;
    std::vector<std::string> failures;
};

std::string shots_name(std::size_t k) { return std::to_string(k) + "-shot"; }

std::vector<std::string> paper_ids(const std::vector<stage1::FewShotExemplar>& ex) {
    std::vector<std::string> out;
    for (const auto& e : ex) out.push_back(e.paper_id);
    return out;
}

const std::string kStage1Target = "manually classified papers";
const std::string kStage2Target = "labeled figures";

FoldResult stage1_fold(const PaperRecord& held, const LabeledPool& pool, std::span<llm::Gateway* const> gateways,
                       const LooConfig& cfg) {
    FoldResult out;
    bool truth = held.label == Label::positive;
    auto library = pool.without(held.paper_id);
    auto index = stage1::build_pool_index(library, cfg.stage1.tokenizer);

    {
        auto ranking = index.full_ranking(bm25::tokenize(held.title_abstract(), cfg.stage1.tokenizer), {held.paper_id});
        FoldLog log{1, "majority vote", held.paper_id, {}, {}};
        for (std::size_t i = 0; i < ranking.size() && i < cfg.baseline_k; ++i) log.retrieved.push_back(ranking[i].doc_id);
        out.logs.push_back(std::move(log));
        bool pred = bm25_majority_baseline(held, library, index, cfg.baseline_k, cfg.stage1.tokenizer);
        out.tally.at("majority vote", "BM25", kStage1Target).add(truth, pred);
    }

    for (auto shots : cfg.stage1_shots) {
        auto method = shots_name(shots);
        try {
            auto opts = cfg.stage1;
            opts.k = shots;
            opts.min_pos = std::min(opts.min_pos, shots / 2);
            opts.min_neg = std::min(opts.min_neg, shots / 2);
            auto ctx = stage1::build_fewshot_context(held, library, index, opts);
            out.logs.push_back({1, method, held.paper_id, paper_ids(ctx.exemplars), paper_ids(ctx.exemplars)});
            auto request = stage1::screening_request(held, ctx, library);
            std::vector<llm::ModelVerdict> verdicts;
            for (auto* g : gateways) {
                try {
                    auto v = llm::parse_verdict(g->complete(request), g->id());
                    out.tally.at(method, g->id(), kStage1Target).add(truth, v.positive);
                    verdicts.push_back(std::move(v));
                } catch (const llm::BackendUnavailable& e) {
                    out.failures.push_back("stage 1 " + method + " fold " + held.paper_id + ": " + e.what());
                }
            }
            if (gateways.size() >= 2 && verdicts.size() == gateways.size())
                out.tally.at(method, "consensus", kStage1Target).add(truth, llm::consensus(verdicts));
        } catch (const Error& e) {
            out.failures.push_back("stage 1 " + method + " fold " + held.paper_id + ": " + e.what());
        }
    }
    return out;
}

FoldResult stage2_fold(const CodedPaper& held, const FigureLibrary& full, llm::Gateway& gateway, const LooConfig& cfg) {
    FoldResult out;
    auto library = full.without(held.paper.paper_id);
    for (auto shots : cfg.stage2_shots) {
        auto method = shots_name(shots);
        try {
            auto opts = cfg.stage2;
            opts.k = shots;
            std::vector<bm25::ScoredDoc> neighbors;
            if (shots > 0 && !library.empty()) neighbors = stage2::retrieve_neighbor_papers(held.paper, library, shots);
            auto exemplars = stage2::sample_exemplars(neighbors, library, opts);
            FoldLog log{2, method, held.paper.paper_id, {}, {}};
            for (const auto& n : neighbors) log.retrieved.push_back(n.doc_id);
            for (const auto& e : exemplars.ordered()) log.exemplars.push_back(e.paper_id);
            out.logs.push_back(std::move(log));
            auto& counts = out.tally.at(method, gateway.id(), kStage2Target);
            for (const auto& f : held.figures) {
                if (!f.relevant) continue;
                try {
                    auto v = stage2::classify_figure(f.evidence, exemplars, gateway);
                    counts.add(*f.relevant, v.relevant);
                } catch (const llm::BackendUnavailable& e) {
                    out.failures.push_back("stage 2 " + method + " " + held.paper.paper_id + " " +
                                           f.evidence.figure_id + ": " + e.what());
                }
            }
            counts.tn.reset();
        } catch (const Error& e) {
            out.failures.push_back("stage 2 " + method + " fold " + held.paper.paper_id + ": " + e.what());
        }
    }
    return out;
}

FoldResult stage3_fold(const CodedPaper& held, const FigureLibrary& full, llm::Gateway& gateway,
                       const stage3::LabelVocabulary& vocab, const LooConfig& cfg) {
    FoldResult out;
    auto library = full.without(held.paper.paper_id);
    auto corpus = stage3::build_figure_corpus(library, cfg.stage3);
    for (auto shots : cfg.stage3_shots) {
        auto method = shots_name(shots);
        // fixed field order so every tally exists even for folds without coded figures
        for (auto field : stage3::kFields) out.tally.at(method, gateway.id(), std::string(stage3::field_name(field)));
        for (const auto& f : held.figures) {
            if (!f.labels) continue;
            try {
                auto hits = stage3::retrieve_similar_figures(f.evidence, corpus, shots, cfg.stage3.per_paper_cap,
                                                             held.paper.paper_id, cfg.stage3);
                FoldLog log{3, method, held.paper.paper_id, {}, {}};
                for (const auto& h : hits) {
                    log.retrieved.push_back(h.paper_id);
                    log.exemplars.push_back(h.paper_id);
                }
                out.logs.push_back(std::move(log));
                auto payload = stage3::extract_labels(f.evidence, hits, corpus, gateway);
                auto predicted = stage3::normalize_labels(payload, vocab, cfg.stage3.normalize);
                for (auto field : stage3::kFields) {
                    const auto& cats = vocab.categories(field);
                    out.tally.at(method, gateway.id(), std::string(stage3::field_name(field))) +=
                        multilabel_counts(f.labels->values(field), predicted.values(field), cats);
                }
            } catch (const Error& e) {
                out.failures.push_back("stage 3 " + method + " " + held.paper.paper_id + " " + f.evidence.figure_id +
                                       ": " + e.what());
            }
        }
    }
    return out;
}

}  // namespace

Report run_loo(const LabeledPool* pool, const FigureLibrary* library, std::span<llm::Gateway* const> gateways,
               const stage3::LabelVocabulary& vocab, const LooConfig& config) {
    if (gateways.empty()) throw ContractError("run_loo: no backends");
    Report report;
    auto emit = [&](int stage, const Tally& tally, const std::string& metric) {
        for (const auto& key : tally.order) {
            ReportRow row{stage, std::get<0>(key), std::get<1>(key), std::get<2>(key), tally.counts.at(key), metric, {}};
            row.score = metric == "precision" ? precision(row.counts) : f1(row.counts);
            report.rows.push_back(std::move(row));
        }
    };
    auto run = [&](int stage, std::size_t folds, auto&& fold_fn) {
        std::vector<FoldResult> results(folds);
        parallel_for(folds, config.threads, [&](std::size_t i) { results[i] = fold_fn(i); });
        Tally total;
        for (auto& r : results) {
            total.merge(r.tally);
            for (auto& l : r.logs) report.folds.push_back(std::move(l));
            for (auto& f : r.failures) report.failures.push_back(std::move(f));
        }
        emit(stage, total, stage == 1 ? "precision" : stage == 2 ? "F1" : "micro-F1");
    };

    if (config.stages.contains(1)) {
        if (!pool || pool->size() < 2) throw ContractError("stage 1 leave-one-out needs at least two labelled papers");
        run(1, pool->size(), [&](std::size_t i) { return stage1_fold(pool->records()[i], *pool, gateways, config); });
    }
    bool figure_stages = config.stages.contains(2) || config.stages.contains(3);
    if (figure_stages && (!library || library->size() < 2))
        throw ContractError("figure-level leave-one-out needs at least two coded papers");
    if (config.stages.contains(2))
        run(2, library->size(),
            [&](std::size_t i) { return stage2_fold(library->papers()[i], *library, *gateways.front(), config); });
    if (config.stages.contains(3))
        run(3, library->size(),
            [&](std::size_t i) { return stage3_fold(library->papers()[i], *library, *gateways.front(), vocab, config); });
    return report;
}

std::vector<std::string> find_leakage(std::span<const FoldLog> folds) {
    std::vector<std::string> out;
    for (const auto& f : folds) {
        auto leaks = [&](const std::vector<std::string>& ids) {
            return std::find(ids.begin(), ids.end(), f.held_out) != ids.end();
        };
        if (leaks(f.retrieved))
            out.push_back("stage " + std::to_string(f.stage) + " " + f.method + ": " + f.held_out + " retrieved");
        if (leaks(f.exemplars))
            out.push_back("stage " + std::to_string(f.stage) + " " + f.method + ": " + f.held_out + " among exemplars");
    }
    return out;
}

}  // namespace litmine::eval
