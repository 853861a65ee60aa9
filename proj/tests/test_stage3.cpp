#include <gtest/gtest.h>

#include <map>
#include <random>

#include "litmine/error.hpp"
#include "litmine/stage3.hpp"
#include "litmine/stub_backend.hpp"

using namespace litmine;
using namespace litmine::stage3;
using nlohmann::json;

namespace {

figctx::FigureEvidence fig(std::string paper_id, std::string figure_id, std::string caption,
                           std::vector<std::string> context = {}) {
    figctx::FigureEvidence e;
    e.paper_id = std::move(paper_id);
    e.figure_id = figure_id;
    e.base_figure_id = figctx::base_figure_id(figure_id);
    e.caption = caption.empty() ? "" : figure_id + ": " + caption;
    e.context = std::move(context);
    e.assembled = figctx::assemble(e.caption, e.context);
    return e;
}

FrameworkLabels gold(std::string listener, std::string type) {
    FrameworkLabels l;
    l.listeners = {std::move(listener)};
    l.data_types = {"temporal"};
    l.vis_type = std::move(type);
    l.vis_purpose = "distribution";
    return l;
}

LabeledEvidence labelled(std::string paper_id, std::string figure_id, std::string caption,
                         std::vector<std::string> context = {}, FrameworkLabels l = gold("input data", "heatmap")) {
    auto e = fig(std::move(paper_id), std::move(figure_id), std::move(caption), std::move(context));
    l.paper_id = e.paper_id;
    l.figure_id = e.figure_id;
    l.base_figure_id = e.base_figure_id;
    return {e, l};
}

}  // namespace

TEST(FigureTokens, CaptionRepeatedThenContext) {
    auto f = fig("P", "Figure 1", "Loss curve", {"The loss drops.", "Later epochs."});
    auto caption = bm25::tokenize(f.caption);
    std::vector<std::string> expected;
    for (int i = 0; i < 3; ++i) expected.insert(expected.end(), caption.begin(), caption.end());
    for (const auto& p : f.context) {
        auto t = bm25::tokenize(p);
        expected.insert(expected.end(), t.begin(), t.end());
    }
    EXPECT_EQ(figure_tokens(f), expected);
    EXPECT_EQ(figure_tokens(f, 1).size(), caption.size() + expected.size() - 3 * caption.size());
}

TEST(FigureTokens, CaptionTermsOutrankContextTerms) {
    std::vector<LabeledEvidence> figs = {labelled("A", "Figure 1", "saliency overlay", {"pixels and colors"}),
                                         labelled("B", "Figure 1", "pixels and colors", {"saliency overlay"})};
    auto corpus = build_figure_corpus(figs);
    auto hits = retrieve_similar_figures(fig("T", "Figure 1", "saliency"), corpus, 2, 3);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].paper_id, "A");
    EXPECT_GT(hits[0].score, hits[1].score);
}

TEST(FigureCorpus, UncaptionedAndDuplicateFiguresSkipped) {
    std::vector<LabeledEvidence> figs = {labelled("A", "Figure 1", "loss"), labelled("A", "Figure 2", ""),
                                         labelled("A", "Figure 1", "loss again")};
    auto corpus = build_figure_corpus(figs);
    EXPECT_EQ(corpus.docs.size(), 1u);
    EXPECT_EQ(corpus.warnings.size(), 2u);
    EXPECT_NE(corpus.find("A#Figure 1"), nullptr);
    EXPECT_EQ(corpus.find("A#Figure 2"), nullptr);
}

TEST(Retrieval, PerPaperCapAndOwnPaperExclusion) {
    std::vector<LabeledEvidence> figs;
    for (int i = 1; i <= 5; ++i) figs.push_back(labelled("X", "Figure " + std::to_string(i), "loss curve"));
    figs.push_back(labelled("Y", "Figure 1", "loss curve detail"));
    figs.push_back(labelled("T", "Figure 1", "loss curve"));
    auto corpus = build_figure_corpus(figs);
    auto target = fig("T", "Figure 9", "loss curve");
    auto hits = retrieve_similar_figures(target, corpus, 10, 3, std::string("T"));
    std::map<std::string, int> per;
    for (const auto& h : hits) ++per[h.paper_id];
    EXPECT_EQ(per["X"], 3);
    EXPECT_EQ(per["Y"], 1);
    EXPECT_EQ(per.count("T"), 0u);
    EXPECT_EQ(hits.size(), 4u);
    EXPECT_TRUE(retrieve_similar_figures(target, corpus, 0, 3).empty());
}

TEST(Retrieval, RandomCorporaRespectCapsAndOrder) {
    std::mt19937 rng(17);
    const std::vector<std::string> words = {"loss", "accuracy", "attention", "neuron", "embedding", "layer"};
    auto text = [&](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) s += words[rng() % words.size()] + " ";
        return s;
    };
    for (int round = 0; round < 200; ++round) {
        std::vector<LabeledEvidence> figs;
        for (std::size_t i = 0, n = 1 + rng() % 15; i < n; ++i)
            figs.push_back(labelled("P" + std::to_string(rng() % 4), "Figure " + std::to_string(i + 1),
                                    text(1 + rng() % 4), {text(rng() % 6)}));
        auto corpus = build_figure_corpus(figs);
        std::size_t k = 1 + rng() % 10, cap = 1 + rng() % 3;
        std::string excluded = "P" + std::to_string(rng() % 4);
        auto hits = retrieve_similar_figures(fig("Q", "Figure 1", text(2)), corpus, k, cap, excluded);
        EXPECT_LE(hits.size(), k);
        std::map<std::string, std::size_t> per;
        for (std::size_t i = 0; i < hits.size(); ++i) {
            EXPECT_NE(hits[i].paper_id, excluded);
            EXPECT_LE(++per[hits[i].paper_id], cap);
            EXPECT_GT(hits[i].score, 0.0);
            if (i > 0) EXPECT_GE(hits[i - 1].score, hits[i].score);
        }
    }
}

TEST(Extraction, ExemplarsShowValuesOnly) {
    std::vector<LabeledEvidence> figs = {labelled("A", "Figure 1", "loss curve")};
    figs[0].labels.annotation(Field::model_listener) = {0.9, "secret evidence"};
    auto corpus = build_figure_corpus(figs);
    auto target = fig("T", "Figure 1", "loss curve");
    auto hits = retrieve_similar_figures(target, corpus, 10, 3, std::string("T"));
    auto r = extraction_request(target, hits, corpus);
    ASSERT_EQ(r.exemplars.size(), 1u);
    EXPECT_EQ(r.exemplars[0].label["visualization_type"], json({{"value", "heatmap"}}));
    EXPECT_EQ(r.user_message().find("secret evidence"), std::string::npos);
    auto own = hits;
    own[0].paper_id = "T";
    EXPECT_THROW(extraction_request(target, own, corpus), ContractError);
}

TEST(RunStage3, EchoesNearestExemplarAndNeverItsOwnPaper) {
    const auto vocab = LabelVocabulary::with_default_aliases();
    std::vector<LabeledEvidence> figs = {
        labelled("T", "Figure 1", "attention heads heatmap", {}, gold("transient state", "heatmap")),
        labelled("A", "Figure 1", "attention heads", {}, gold("input data", "statistical chart")),
        labelled("B", "Figure 1", "loss curve", {}, gold("dynamics (time)", "statistical chart"))};
    auto corpus = build_figure_corpus(figs);
    llm::Gateway gw(std::make_shared<llm::StubBackend>(json{{"id", "echo"}, {"extraction", {{"default", "echo_nearest"}}}}));
    std::vector<figctx::FigureEvidence> targets = {fig("T", "Figure 2a", "attention heads heatmap"),
                                                   fig("T", "Figure 2b", "loss curve")};
    Options o;
    o.k = 2;
    auto r = run_stage3(targets, corpus, gw, vocab, o);
    ASSERT_EQ(r.figures.size(), 2u);
    for (const auto& f : r.figures)
        for (const auto& h : f.exemplars) EXPECT_NE(h.paper_id, "T");
    EXPECT_EQ(r.figures[0].exemplars.front().paper_id, "A");
    EXPECT_EQ(r.figures[0].labels->listeners, std::set<std::string>{"input data"});
    EXPECT_EQ(r.figures[1].labels->listeners, std::set<std::string>{"dynamics (time)"});
    ASSERT_EQ(r.labels.size(), 1u);
    EXPECT_EQ(r.labels[0].figure_id, "Figure 2");
    EXPECT_EQ(r.labels[0].listeners, (std::set<std::string>{"dynamics (time)", "input data"}));
    EXPECT_EQ(r.labels[0].vis_type, "statistical chart");
}

TEST(RunStage3, ZeroShotWithheldAndThreadIndependent) {
    const auto vocab = LabelVocabulary::with_default_aliases();
    std::vector<LabeledEvidence> figs = {labelled("A", "Figure 1", "loss curve")};
    auto corpus = build_figure_corpus(figs);
    json rules = {{"id", "s"},
                  {"fail_if_any", {"flaky"}},
                  {"extraction",
                   {{"rules",
                     {{{"if_any", {"loss"}},
                       {"payload",
                        {{"model_listener", {"training dynamics"}},
                         {"data_type", {"time series"}},
                         {"visualization_type", "line chart"},
                         {"visualization_purpose", "performance"}}}}}},
                    {"default", "echo_nearest"}}}};
    std::vector<figctx::FigureEvidence> targets;
    for (int i = 1; i <= 12; ++i)
        targets.push_back(fig("T", "Figure " + std::to_string(i), i % 5 == 0 ? "flaky" : i % 2 ? "loss" : "other"));
    std::string first;
    for (std::size_t threads : {1u, 3u, 8u}) {
        llm::GatewayOptions go;
        go.max_attempts = 1;
        llm::Gateway gw(std::make_shared<llm::StubBackend>(rules), nullptr, go);
        Options o;
        o.k = 0;
        o.threads = threads;
        auto r = run_stage3(targets, corpus, gw, vocab, o);
        EXPECT_EQ(r.retry, (std::vector<std::string>{"T#Figure 5", "T#Figure 10"}));
        for (const auto& f : r.figures) EXPECT_TRUE(f.exemplars.empty());
        std::string dump;
        for (const auto& l : r.labels) dump += to_json(l).dump() + "\n";
        if (first.empty()) first = dump;
        EXPECT_EQ(dump, first);
        // echo_nearest with no exemplars gives {}: listener fallback, flagged
        EXPECT_TRUE(r.labels[1].flagged);
        EXPECT_EQ(r.labels[0].vis_purpose, "performance evaluation");
    }
}
