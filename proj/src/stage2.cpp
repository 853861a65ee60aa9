#include "litmine/stage2.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "litmine/error.hpp"
#include "litmine/parallel.hpp"

namespace litmine::stage2 {

using nlohmann::json;

std::vector<bm25::ScoredDoc> retrieve_neighbor_papers(const PaperRecord& target, const FigureLibrary& library,
                                                      std::size_t k) {
    if (k == 0) return {};
    if (library.empty()) throw ContractError("stage 2: empty sample library");
    auto query = bm25::tokenize(target.title_abstract(), library.tokenizer());
    return library.paper_index().top_k(query, k, {target.paper_id});
}

std::vector<ExemplarFigure> FigureExemplarSet::ordered() const {
    std::vector<ExemplarFigure> out;
    for (std::size_t i = 0; i < std::max(positives.size(), negatives.size()); ++i) {
        if (i < positives.size()) out.push_back(positives[i]);
        if (i < negatives.size()) out.push_back(negatives[i]);
    }
    return out;
}

FigureExemplarSet sample_exemplars(std::span<const bm25::ScoredDoc> neighbors, const FigureLibrary& library,
                                   const Options& options) {
    std::vector<ExemplarFigure> pos, neg;
    for (const auto& n : neighbors) {
        const auto* paper = library.find(n.doc_id);
        if (!paper) continue;
        std::size_t np = 0, nn = 0;
        for (const auto& f : paper->figures) {
            if (!f.relevant) continue;
            ExemplarFigure e{paper->paper.paper_id, f.evidence.figure_id, *f.relevant, f.evidence.assembled};
            if (*f.relevant && np < options.per_neighbor_positive) {
                pos.push_back(std::move(e));
                ++np;
            } else if (!*f.relevant && nn < options.per_neighbor_negative) {
                neg.push_back(std::move(e));
                ++nn;
            }
        }
    }
    FigureExemplarSet set;
    std::size_t i = 0, j = 0;
    while (set.size() < options.max_exemplars && (i < pos.size() || j < neg.size())) {
        if (i < pos.size()) set.positives.push_back(pos[i++]);
        if (set.size() < options.max_exemplars && j < neg.size()) set.negatives.push_back(neg[j++]);
    }
    return set;
}

json RelevanceVerdict::to_json() const {
    json j = {{"paper_id", paper_id}, {"figure_id", figure_id}, {"base_figure_id", base_figure_id},
              {"relevant", relevant}, {"confidence", confidence},  {"snippet", snippet},
              {"selected", selected}, {"withheld", withheld}};
    j["suggested_role"] = suggested_role ? json(llm::to_string(*suggested_role)) : json(nullptr);
    j["role"] = role ? json(llm::to_string(*role)) : json(nullptr);
    if (malformed) j["malformed"] = true;
    if (!error.empty()) j["error"] = error;
    return j;
}

llm::PromptRequest relevance_request(const figctx::FigureEvidence& target, const FigureExemplarSet& exemplars) {
    std::vector<llm::Exemplar> shots;
    for (const auto& e : exemplars.ordered()) {
        if (e.paper_id == target.paper_id) throw ContractError("exemplar from the target's own paper " + e.paper_id);
        shots.push_back({e.paper_id + "#" + e.figure_id, e.evidence, json{{"relevant", e.relevant}}});
    }
    return llm::PromptRequest::make(llm::kRelevanceSchema, std::move(shots), target.paper_id + "#" + target.figure_id,
                                    target.assembled);
}

RelevanceVerdict classify_figure(const figctx::FigureEvidence& target, const FigureExemplarSet& exemplars,
                                 llm::Gateway& gateway) {
    if (target.assembled.empty()) throw ContractError("classify_figure: empty evidence for " + target.figure_id);
    auto parsed = llm::parse_verdict(gateway.complete(relevance_request(target, exemplars)), gateway.id());
    RelevanceVerdict v;
    v.paper_id = target.paper_id;
    v.figure_id = target.figure_id;
    v.base_figure_id = target.base_figure_id;
    v.relevant = parsed.positive;
    v.confidence = parsed.confidence;
    v.snippet = parsed.evidence;
    v.suggested_role = parsed.role;
    v.malformed = parsed.malformed;
    return v;
}

namespace {

bool better(const RelevanceVerdict& a, const RelevanceVerdict& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return figctx::figure_id_less(a.figure_id, b.figure_id);
}

}  // namespace

std::vector<RelevanceVerdict> select_representatives(std::span<const RelevanceVerdict> verdicts, std::size_t max) {
    std::vector<RelevanceVerdict> pool;
    for (const auto& v : verdicts)
        if (v.relevant && !v.withheld) pool.push_back(v);
    std::sort(pool.begin(), pool.end(), better);

    std::vector<bool> taken(pool.size(), false);
    std::vector<RelevanceVerdict> chosen;
    for (auto role : {llm::Role::overview, llm::Role::performance, llm::Role::mechanism}) {
        if (chosen.size() >= max) break;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (taken[i] || pool[i].suggested_role != role) continue;
            taken[i] = true;
            chosen.push_back(pool[i]);
            chosen.back().role = role;
            break;
        }
    }
    for (std::size_t i = 0; i < pool.size() && chosen.size() < max; ++i) {
        if (taken[i]) continue;
        taken[i] = true;
        chosen.push_back(pool[i]);
        chosen.back().role.reset();
    }
    for (auto& c : chosen) c.selected = true;
    std::sort(chosen.begin(), chosen.end(),
              [](const RelevanceVerdict& a, const RelevanceVerdict& b) { return figctx::figure_id_less(a.figure_id, b.figure_id); });
    return chosen;
}

Result run_stage2(std::span<const PaperRecord> papers, std::span<const figctx::FigureEvidence> evidence,
                  const FigureLibrary& library, llm::Gateway& gateway, const Options& options) {
    Result result;
    std::map<std::string, std::vector<const figctx::FigureEvidence*>> by_paper;
    std::set<std::string> wanted;
    for (const auto& p : papers) wanted.insert(p.paper_id);
    for (const auto& e : evidence) {
        if (!wanted.contains(e.paper_id)) {
            result.warnings.push_back("evidence for " + e.paper_id + " " + e.figure_id + " has no matching paper; ignored");
            continue;
        }
        by_paper[e.paper_id].push_back(&e);
    }
    for (auto& [id, figs] : by_paper)
        std::stable_sort(figs.begin(), figs.end(), [](const auto* a, const auto* b) {
            return figctx::figure_id_less(a->figure_id, b->figure_id);
        });

    struct Task {
        std::size_t paper;
        const figctx::FigureEvidence* figure;
    };
    std::vector<FigureExemplarSet> exemplar_sets(papers.size());
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < papers.size(); ++i) {
        auto neighbors = retrieve_neighbor_papers(papers[i], library, options.k);
        exemplar_sets[i] = sample_exemplars(neighbors, library, options);
        for (const auto* f : by_paper[papers[i].paper_id]) tasks.push_back({i, f});
    }

    std::vector<RelevanceVerdict> verdicts(tasks.size());
    parallel_for(tasks.size(), options.threads, [&](std::size_t t) {
        const auto& task = tasks[t];
        try {
            verdicts[t] = classify_figure(*task.figure, exemplar_sets[task.paper], gateway);
        } catch (const llm::BackendUnavailable& e) {
            auto& v = verdicts[t];
            v.paper_id = task.figure->paper_id;
            v.figure_id = task.figure->figure_id;
            v.base_figure_id = task.figure->base_figure_id;
            v.withheld = true;
            v.snippet = "(withheld)";
            v.error = e.what();
        }
    });

    // per-paper reduction, in paper order
    std::size_t t = 0;
    for (std::size_t i = 0; i < papers.size(); ++i) {
        std::size_t begin = t;
        while (t < tasks.size() && tasks[t].paper == i) ++t;
        std::span<RelevanceVerdict> mine(verdicts.data() + begin, t - begin);
        auto chosen = select_representatives(mine, options.max_figures);
        bool pending = std::any_of(mine.begin(), mine.end(), [](const RelevanceVerdict& v) { return v.withheld; });
        if (chosen.empty() && !pending) result.excluded_papers.push_back(papers[i].paper_id);
        if (chosen.empty() && pending)
            result.warnings.push_back(papers[i].paper_id + ": no relevant figure yet; withheld figures pending retry");
        for (auto& v : mine) {
            for (const auto& c : chosen)
                if (c.figure_id == v.figure_id) {
                    v.selected = true;
                    v.role = c.role;
                }
            if (v.withheld) result.retry.push_back(v.paper_id + "#" + v.figure_id);
        }
    }
    result.verdicts = std::move(verdicts);
    return result;
}

}  // namespace litmine::stage2
