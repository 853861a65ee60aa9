#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "litmine/error.hpp"
#include "litmine/eval.hpp"
#include "litmine/io.hpp"
#include "litmine/stub_backend.hpp"
#include "support.hpp"

using namespace litmine;
using namespace litmine::eval;
using testing_support::fixture_dir;
using testing_support::make_pool;
using testing_support::paper;

namespace {

ConfusionCounts counts(std::size_t tp, std::size_t fp, std::optional<std::size_t> tn, std::size_t fn) {
    ConfusionCounts c;
    c.tp = tp;
    c.fp = fp;
    c.tn = tn;
    c.fn = fn;
    return c;
}

}  // namespace

TEST(Metrics, StageOneReportedPrecisions) {
    EXPECT_NEAR(precision(counts(31, 20, 13, 4)).value, 0.608, 1e-3);
    EXPECT_NEAR(precision(counts(28, 2, 31, 7)).value, 0.933, 1e-3);
    EXPECT_NEAR(precision(counts(32, 4, 29, 3)).value, 0.889, 1e-3);
    EXPECT_NEAR(precision(counts(31, 2, 33, 2)).value, 0.939, 1e-3);
}

// One reported 6-shot row lists 0.889, but its counts give 31/33.
TEST(Metrics, InconsistentSixShotRowFollowsItsCounts) {
    EXPECT_DOUBLE_EQ(precision(counts(31, 2, 31, 4)).value, 31.0 / 33.0);
    EXPECT_GT(std::abs(precision(counts(31, 2, 31, 4)).value - 0.889), 1e-3);
}

TEST(Metrics, StageTwoReportedF1) {
    EXPECT_NEAR(f1(counts(61, 3, std::nullopt, 44)).value, 0.722, 1e-3);
    EXPECT_NEAR(f1(counts(73, 5, std::nullopt, 32)).value, 0.798, 1e-3);
}

TEST(Metrics, StageThreeReportedMicroF1) {
    struct Row {
        std::size_t tp, fp, fn;
        double score;
    };
    std::vector<Row> rows = {{82, 19, 25, 0.788}, {77, 21, 43, 0.706}, {32, 29, 29, 0.525}, {46, 15, 15, 0.754},
                             {106, 16, 22, 0.848}, {101, 27, 43, 0.743}, {55, 18, 18, 0.753}, {59, 14, 14, 0.808}};
    std::mt19937 rng(1);
    for (const auto& r : rows) {
        // split the totals over random per-figure counts; micro-F1 sums first
        std::vector<ConfusionCounts> figs(1 + rng() % 40);
        for (std::size_t i = 0; i < r.tp; ++i) figs[rng() % figs.size()].tp++;
        for (std::size_t i = 0; i < r.fp; ++i) figs[rng() % figs.size()].fp++;
        for (std::size_t i = 0; i < r.fn; ++i) figs[rng() % figs.size()].fn++;
        EXPECT_NEAR(micro_f1(figs).value, r.score, 1e-3);
    }
}

TEST(Metrics, ZeroDenominatorsFlagged) {
    auto p = precision(counts(0, 0, 5, 3));
    EXPECT_EQ(p.value, 0.0);
    EXPECT_TRUE(p.flagged);
    EXPECT_TRUE(recall(counts(0, 2, 1, 0)).flagged);
    EXPECT_TRUE(f1(ConfusionCounts{}).flagged);
    EXPECT_FALSE(f1(counts(1, 0, std::nullopt, 0)).flagged);
    EXPECT_THROW(micro_f1(std::vector<ConfusionCounts>{}), ContractError);
}

TEST(Metrics, F1IsHarmonicMean) {
    std::mt19937 rng(2);
    for (int i = 0; i < 500; ++i) {
        auto c = counts(1 + rng() % 50, rng() % 50, std::nullopt, rng() % 50);
        double p = precision(c).value, r = recall(c).value;
        EXPECT_NEAR(f1(c).value, 2 * p * r / (p + r), 1e-12);
    }
}

TEST(Metrics, BinaryCountsIncludeTrueNegatives) {
    ConfusionCounts c;
    c.add(true, true);
    c.add(true, false);
    c.add(false, true);
    c.add(false, false);
    c.add(false, false);
    EXPECT_EQ(c, counts(1, 1, 2, 1));
    c += counts(1, 0, std::nullopt, 0);
    EXPECT_EQ(c.tp, 2u);
}

TEST(Multilabel, SetCounts) {
    std::vector<std::string> v = {"a", "b", "c", "d"};
    EXPECT_EQ(multilabel_counts({"a", "b"}, {"b", "c"}, v), counts(1, 1, std::nullopt, 1));
    EXPECT_EQ(multilabel_counts({"a"}, {"a"}, v), counts(1, 0, std::nullopt, 0));
    EXPECT_EQ(multilabel_counts({"a", "b", "c"}, {"d"}, v), counts(0, 1, std::nullopt, 3));
    EXPECT_THROW(multilabel_counts({"a"}, {"z"}, v), ContractError);
}

TEST(Baseline, MatchesBruteForceMajority) {
    std::mt19937 rng(9);
    const std::vector<std::string> words = {"model", "neural", "map", "color", "graph", "text"};
    for (int round = 0; round < 300; ++round) {
        std::vector<PaperRecord> recs;
        for (std::size_t i = 0, n = 2 + rng() % 10; i < n; ++i) {
            std::string t;
            for (std::size_t w = 0, m = 1 + rng() % 4; w < m; ++w) t += words[rng() % words.size()] + " ";
            recs.push_back(paper("p" + std::to_string(i), t, "", 2020, rng() % 2 ? Label::positive : Label::negative));
        }
        if (std::none_of(recs.begin(), recs.end(), [](auto& r) { return r.label == Label::positive; }))
            recs[0].label = Label::positive;
        auto pool = make_pool(recs);
        auto index = stage1::build_pool_index(pool);
        const auto& target = pool.records()[rng() % pool.size()];
        std::size_t k = 1 + rng() % 7;

        auto query = bm25::tokenize(target.title_abstract());
        std::vector<std::pair<double, std::string>> all;
        for (const auto& r : pool.records())
            if (r.paper_id != target.paper_id) all.push_back({-index.score(query, r.paper_id), r.paper_id});
        std::sort(all.begin(), all.end());
        std::size_t yes = 0, n = std::min(k, all.size());
        for (std::size_t i = 0; i < n; ++i) yes += pool.is_positive(all[i].second);
        bool expected = 2 * yes >= n;
        EXPECT_EQ(bm25_majority_baseline(target, pool, index, k), expected) << "round " << round;
    }
}

TEST(Leakage, DetectsHeldOutPaperInLogs) {
    std::vector<FoldLog> logs = {{1, "6-shot", "A", {"B", "C"}, {"B", "C"}},
                                 {2, "5-shot", "B", {"A", "B"}, {"A"}},
                                 {3, "10-shot", "C", {"A"}, {"A", "C"}}};
    auto found = find_leakage(logs);
    ASSERT_EQ(found.size(), 2u);
    EXPECT_NE(found[0].find("B"), std::string::npos);
    EXPECT_NE(found[1].find("C"), std::string::npos);
    EXPECT_TRUE(find_leakage(std::span<const FoldLog>(logs.data(), 1)).empty());
}

namespace {

struct EvalFixture {
    stage3::LabelVocabulary vocab = stage3::LabelVocabulary::with_default_aliases();
    LabeledPool pool;
    FigureLibrary library;
    std::vector<std::unique_ptr<llm::Gateway>> owned;
    std::vector<llm::Gateway*> gateways;

    EvalFixture() {
        std::ifstream raw(fixture_dir() / "corpus.jsonl");
        auto corpus = ingest_metadata(raw).corpus;
        auto lines = io::read_jsonl(fixture_dir() / "pool.jsonl");
        pool = load_labeled_pool(corpus, assignments_from_json(lines));
        library = load_library(fixture_dir() / "library.jsonl", vocab);
        llm::GatewayOptions go;
        go.sleep = [](std::chrono::milliseconds) {};
        for (const char* name : {"primary", "secondary"}) {
            auto rules = io::read_json(fixture_dir() / "stubs" / (std::string(name) + ".json"));
            owned.push_back(std::make_unique<llm::Gateway>(std::make_shared<llm::StubBackend>(rules), nullptr, go));
            gateways.push_back(owned.back().get());
        }
    }

    Report run(std::size_t threads) {
        LooConfig c;
        c.stage1_shots = {0, 6};
        c.stage2_shots = {0, 5};
        c.stage3_shots = {0, 10};
        c.baseline_k = 7;
        c.threads = threads;
        return run_loo(&pool, &library, gateways, vocab, c);
    }
};

void expect_row(const Report& r, int stage, const std::string& method, const std::string& model,
                const std::string& target, ConfusionCounts expected) {
    const auto* row = r.find(stage, method, model, target);
    ASSERT_NE(row, nullptr) << stage << " " << method << " " << model << " " << target;
    EXPECT_EQ(row->counts, expected) << stage << " " << method << " " << model << " " << target;
}

}  // namespace

TEST(LeaveOneOut, FixtureCountsMatchHandTrace) {
    EvalFixture f;
    ASSERT_EQ(f.pool.size(), 8u);
    ASSERT_EQ(f.library.size(), 12u);
    auto r = f.run(1);
    EXPECT_TRUE(r.failures.empty());

    // k = 7 covers the whole remaining pool, so the majority is always the other class
    expect_row(r, 1, "majority vote", "BM25", "", counts(0, 4, 0, 4));
    for (std::string m : {"0-shot", "6-shot"}) {
        expect_row(r, 1, m, "primary", "", counts(3, 2, 2, 1));
        expect_row(r, 1, m, "secondary", "", counts(3, 2, 2, 1));
        expect_row(r, 1, m, "consensus", "", counts(2, 1, 3, 2));
    }
    for (std::string m : {"0-shot", "5-shot"}) expect_row(r, 2, m, "primary", "", counts(21, 1, std::nullopt, 1));
    for (std::string m : {"0-shot", "10-shot"}) {
        expect_row(r, 3, m, "primary", "model_listener", counts(26, 2, std::nullopt, 3));
        expect_row(r, 3, m, "primary", "data_type", counts(24, 2, std::nullopt, 1));
        expect_row(r, 3, m, "primary", "visualization_type", counts(20, 2, std::nullopt, 2));
        expect_row(r, 3, m, "primary", "visualization_purpose", counts(22, 0, std::nullopt, 0));
    }
    const auto* consensus = r.find(1, "6-shot", "consensus");
    EXPECT_EQ(consensus->metric, "precision");
    EXPECT_NEAR(consensus->score.value, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.find(2, "5-shot", "primary")->score.value, 42.0 / 44.0, 1e-12);
    EXPECT_NEAR(r.find(3, "10-shot", "primary", "model_listener")->score.value, 52.0 / 57.0, 1e-12);
}

TEST(LeaveOneOut, NoFoldSeesItsHeldOutPaper) {
    EvalFixture f;
    auto r = f.run(1);
    // stage 1: 8 folds x (baseline + 2 shot settings); stage 2: 12 folds x 2;
    // stage 3: 22 coded figures x 2
    std::size_t s1 = 0, s2 = 0, s3 = 0, nonempty = 0;
    for (const auto& log : r.folds) {
        (log.stage == 1 ? s1 : log.stage == 2 ? s2 : s3)++;
        nonempty += !log.exemplars.empty();
    }
    EXPECT_EQ(s1, 24u);
    EXPECT_EQ(s2, 24u);
    EXPECT_EQ(s3, 44u);
    EXPECT_GT(nonempty, 0u);
    EXPECT_TRUE(find_leakage(r.folds).empty());
}

TEST(LeaveOneOut, ReportIndependentOfThreads) {
    EvalFixture a, b;
    EXPECT_EQ(a.run(1).to_json().dump(), b.run(4).to_json().dump());
}
