#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "litmine/bm25.hpp"
#include "litmine/error.hpp"

using namespace litmine;
using namespace litmine::bm25;

namespace {

// Score-all oracle: recomputes every statistic from the raw token lists.
std::vector<ScoredDoc> oracle_rank(const std::vector<TokenizedDoc>& docs, const std::vector<std::string>& query,
                                   std::size_t k, const std::set<std::string>& exclude = {}) {
    const double k1 = 1.2, b = 0.75;
    double n = static_cast<double>(docs.size());
    double total = 0;
    for (const auto& d : docs) total += static_cast<double>(d.tokens.size());
    double avgdl = total / n;
    std::vector<ScoredDoc> all;
    for (const auto& d : docs) {
        if (exclude.count(d.doc_id)) continue;
        double s = 0;
        for (const auto& q : query) {
            std::size_t tf = std::count(d.tokens.begin(), d.tokens.end(), q);
            if (tf == 0) continue;
            double df = 0;
            for (const auto& other : docs) df += std::count(other.tokens.begin(), other.tokens.end(), q) > 0 ? 1 : 0;
            double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
            double f = static_cast<double>(tf);
            s += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * static_cast<double>(d.tokens.size()) / avgdl));
        }
        if (s > 0) all.push_back({d.doc_id, s});
    }
    // selection sort with the explicit tie rule
    std::vector<ScoredDoc> out;
    while (!all.empty() && out.size() < k) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < all.size(); ++i)
            if (all[i].score > all[best].score ||
                (all[i].score == all[best].score && all[i].doc_id < all[best].doc_id))
                best = i;
        out.push_back(all[best]);
        all.erase(all.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return out;
}

std::vector<TokenizedDoc> tiny() {
    return {{"d1", {"apple", "banana"}}, {"d2", {"apple", "apple", "cherry"}}, {"d3", {"banana"}}};
}

}  // namespace

TEST(Bm25, HandComputedScores) {
    auto idx = Index::build(tiny());
    std::vector<std::string> q = {"apple"};
    EXPECT_DOUBLE_EQ(idx.avg_doc_length(), 2.0);
    EXPECT_EQ(idx.document_frequency("apple"), 2u);
    // idf = ln(1.5/2.5 + 1); d1 term factor 2.2/2.2, d2 4.4/3.65
    EXPECT_NEAR(idx.idf("apple"), 0.47000362924573563, 1e-15);
    EXPECT_NEAR(idx.score(q, "d1"), 0.47000362924573563, 1e-12);
    EXPECT_NEAR(idx.score(q, "d2"), 0.5665797174469143, 1e-12);
    EXPECT_EQ(idx.score(q, "d3"), 0.0);
}

TEST(Bm25, IdfNeverNegative) {
    auto idx = Index::build({{"a", {"x"}}, {"b", {"x"}}, {"c", {"x"}}});
    EXPECT_GT(idx.idf("x"), 0.0);
}

TEST(Bm25, TopKOmitsZeroScoresAndBreaksTiesById) {
    auto idx = Index::build({{"b", {"x", "y"}}, {"a", {"x", "y"}}, {"c", {"z", "z"}}});
    std::vector<std::string> q = {"x"};
    auto hits = idx.top_k(q, 5);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].doc_id, "a");
    EXPECT_EQ(hits[1].doc_id, "b");
    EXPECT_EQ(hits[0].score, hits[1].score);
}

TEST(Bm25, ExcludedDocsNeverReturned) {
    auto idx = Index::build(tiny());
    std::vector<std::string> q = {"apple", "banana"};
    for (const auto& h : idx.top_k(q, 3, {"d2"})) EXPECT_NE(h.doc_id, "d2");
    for (const auto& h : idx.full_ranking(q, {"d2"})) EXPECT_NE(h.doc_id, "d2");
}

TEST(Bm25, FullRankingAppendsZeroScoreDocsInIdOrder) {
    auto idx = Index::build({{"z", {"q"}}, {"m", {"other"}}, {"a", {"none"}}});
    std::vector<std::string> q = {"q"};
    auto all = idx.full_ranking(q);
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0].doc_id, "z");
    EXPECT_EQ(all[1].doc_id, "a");
    EXPECT_EQ(all[2].doc_id, "m");
}

TEST(Bm25, RepeatedQueryTokensCountPerOccurrence) {
    auto idx = Index::build(tiny());
    std::vector<std::string> once = {"cherry"}, twice = {"cherry", "cherry"};
    EXPECT_DOUBLE_EQ(idx.score(twice, "d2"), 2 * idx.score(once, "d2"));
}

TEST(Bm25, ContractViolations) {
    EXPECT_THROW(Index::build({{"a", {"x"}}, {"a", {"y"}}}), ContractError);
    EXPECT_THROW(Index::build({{"a", {""}}}), ContractError);
    auto idx = Index::build(tiny());
    std::vector<std::string> q = {"apple"};
    EXPECT_THROW(idx.top_k(q, 0), ContractError);
    EXPECT_THROW(idx.score(q, "nope"), ContractError);
}

TEST(Bm25, EmptyIndexReturnsNothing) {
    auto idx = Index::build({});
    std::vector<std::string> q = {"x"};
    EXPECT_TRUE(idx.top_k(q, 3).empty());
    EXPECT_TRUE(idx.full_ranking(q).empty());
}

TEST(Bm25, TokenizerOptions) {
    EXPECT_EQ(tokenize("A model of the Models"), (std::vector<std::string>{"model", "of", "the", "models"}));
    TokenizerOptions opts;
    opts.remove_stopwords = true;
    opts.stem = true;
    EXPECT_EQ(tokenize("A model of the Models; queries", opts),
              (std::vector<std::string>{"model", "model", "query"}));
}

TEST(Bm25, RandomCorporaMatchScoreAllOracle) {
    std::mt19937 rng(20240611);
    const std::vector<std::string> vocab = {"aa", "bb", "cc", "dd", "ee", "ff", "gg"};
    for (int round = 0; round < 200; ++round) {
        std::size_t n = 1 + rng() % 10;
        std::vector<TokenizedDoc> docs;
        for (std::size_t i = 0; i < n; ++i) {
            TokenizedDoc d{"doc" + std::to_string(rng() % 1000), {}};
            bool dup = std::any_of(docs.begin(), docs.end(), [&](auto& o) { return o.doc_id == d.doc_id; });
            if (dup) continue;
            std::size_t len = rng() % 8;
            for (std::size_t t = 0; t < len; ++t) d.tokens.push_back(vocab[rng() % vocab.size()]);
            docs.push_back(std::move(d));
        }
        std::vector<std::string> query;
        std::size_t qlen = 1 + rng() % 6;
        for (std::size_t t = 0; t < qlen; ++t) query.push_back(vocab[rng() % vocab.size()]);
        std::size_t k = 1 + rng() % 10;

        auto idx = Index::build(docs);
        auto got = idx.top_k(query, k);
        auto want = oracle_rank(docs, query, k);
        ASSERT_EQ(got.size(), want.size()) << "round " << round;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].doc_id, want[i].doc_id) << "round " << round << " rank " << i;
            EXPECT_NEAR(got[i].score, want[i].score, 1e-12);
        }
    }
}
