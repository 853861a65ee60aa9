#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include "litmine/llm_gateway.hpp"
#include "litmine/stub_backend.hpp"
#include "support.hpp"

using namespace litmine;
using namespace litmine::llm;
using nlohmann::json;

namespace {

PromptRequest screening(std::string target) {
    return PromptRequest::make(kScreeningSchema, {}, "t1", std::move(target));
}

// Fails the first `failures` sends with a transient error, then answers.
class FlakyBackend : public Backend {
  public:
    explicit FlakyBackend(int failures, bool auth = false) : failures_(failures), auth_(auth) {}
    std::string id() const override { return "flaky"; }
    std::string send(const PromptRequest&) override {
        ++calls;
        if (auth_) throw AuthError("401");
        if (calls <= failures_) throw TransientError("timeout");
        return R"({"relevant": true, "confidence": 0.7, "evidence": "ok"})";
    }
    int calls = 0;

  private:
    int failures_;
    bool auth_;
};

GatewayOptions recording(std::vector<std::chrono::milliseconds>& sleeps) {
    GatewayOptions o;
    o.sleep = [&sleeps](std::chrono::milliseconds d) { sleeps.push_back(d); };
    return o;
}

}  // namespace

TEST(ParseVerdict, WellFormedReply) {
    auto v = parse_verdict(R"({"relevant": true, "confidence": 0.9, "evidence": "loss curves"})", "primary");
    EXPECT_TRUE(v.positive);
    EXPECT_DOUBLE_EQ(v.confidence, 0.9);
    EXPECT_EQ(v.evidence, "loss curves");
    EXPECT_EQ(v.backend, "primary");
    EXPECT_FALSE(v.malformed);
}

TEST(ParseVerdict, MalformedBecomesSafeNegative) {
    for (const char* raw : {"maybe?", "", "{\"confidence\": 0.8}", "{\"relevant\": \"perhaps\"}", "[true]"}) {
        auto v = parse_verdict(raw);
        EXPECT_FALSE(v.positive) << raw;
        EXPECT_EQ(v.confidence, 0.0) << raw;
        EXPECT_EQ(v.evidence, kMalformedEvidence) << raw;
        EXPECT_TRUE(v.malformed) << raw;
    }
}

TEST(ParseVerdict, ClipsConfidenceAndToleratesFences) {
    EXPECT_EQ(parse_verdict(R"({"relevant": true, "confidence": 1.7})").confidence, 1.0);
    EXPECT_EQ(parse_verdict(R"({"relevant": true, "confidence": -2})").confidence, 0.0);
    auto v = parse_verdict("Sure!\n```json\n{\"relevant\": \"yes\", \"confidence\": 0.6, \"role\": \"Mechanism\"}\n```");
    EXPECT_TRUE(v.positive);
    EXPECT_EQ(v.role, Role::mechanism);
    EXPECT_EQ(parse_verdict(R"({"relevant": 1})").positive, true);
}

TEST(ParseVerdict, NeverThrowsOnRandomText) {
    std::mt19937 rng(99);
    const std::string alphabet = "{}[]\":,0123456789.-truefalsnel relvantconfidcy\\";
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        std::size_t len = rng() % 60;
        for (std::size_t j = 0; j < len; ++j) s += alphabet[rng() % alphabet.size()];
        if (i % 3 == 0) s = "{\"relevant\": true, \"confidence\": " + s + "}";
        ModelVerdict v;
        ASSERT_NO_THROW(v = parse_verdict(s)) << s;
        EXPECT_GE(v.confidence, 0.0);
        EXPECT_LE(v.confidence, 1.0);
        EXPECT_LE(v.evidence.size(), 4 * kEvidenceCap);
    }
}

TEST(Consensus, TruthTableForTwoBackends) {
    for (bool a : {false, true})
        for (bool b : {false, true}) {
            std::vector<ModelVerdict> vs(2);
            vs[0].positive = a;
            vs[1].positive = b;
            EXPECT_EQ(consensus(vs), a && b);
            std::swap(vs[0], vs[1]);
            EXPECT_EQ(consensus(vs), a && b);
        }
    EXPECT_THROW(consensus(std::vector<ModelVerdict>{}), ContractError);
}

TEST(Consensus, MonotoneForAnyBackendCount) {
    for (unsigned mask = 0; mask < 32; ++mask) {
        std::vector<ModelVerdict> vs(5);
        for (int i = 0; i < 5; ++i) vs[i].positive = (mask >> i) & 1u;
        bool base = consensus(vs);
        for (int i = 0; i < 5; ++i) {
            if (!vs[i].positive) continue;
            auto flipped = vs;
            flipped[i].positive = false;
            EXPECT_LE(consensus(flipped), base) << mask;
            EXPECT_FALSE(consensus(flipped));
        }
    }
}

TEST(Prompt, UserMessageLayout) {
    auto r = PromptRequest::make(kScreeningSchema, {{"p9", "Title: A", json{{"relevant", true}}}}, "t", "Title: B");
    EXPECT_EQ(r.user_message(), "Labeled examples:\n\n### Example 1\nTitle: A\nAnswer: {\"relevant\":true}\n\n"
                                "### TARGET\nTitle: B\nAnswer:");
    EXPECT_NE(r.content_hash(), screening("Title: B").content_hash());
    EXPECT_THROW(system_instructions("nope"), ContractError);
}

TEST(Gateway, IdenticalPromptServedFromCache) {
    auto stub = keyword_stub("primary", "saliency");
    Gateway g(stub, nullptr);
    auto first = g.complete(screening("Saliency maps for CNNs"));
    auto second = g.complete(screening("Saliency maps for CNNs"));
    EXPECT_EQ(first, second);
    EXPECT_TRUE(parse_verdict(first).positive);
    EXPECT_EQ(stub->calls(), 1u);
    EXPECT_EQ(g.stats().network_calls, 1u);
    EXPECT_EQ(g.stats().cache_hits, 1u);
}

TEST(Gateway, DiskCacheSurvivesRestart) {
    testing_support::TempDir dir;
    auto stub = keyword_stub("primary", "saliency");
    {
        Gateway g(stub, std::make_shared<ResponseCache>(dir.path()));
        g.complete(screening("saliency"));
    }
    Gateway g(stub, std::make_shared<ResponseCache>(dir.path()));
    g.complete(screening("saliency"));
    EXPECT_EQ(stub->calls(), 1u);
    EXPECT_EQ(g.stats().network_calls, 0u);
    auto key = ResponseCache::key(stub->cache_identity(), screening("saliency"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / key.substr(0, 2) / (key + ".json")));
}

TEST(Gateway, BackendsDoNotShareCacheEntries) {
    auto cache = std::make_shared<ResponseCache>();
    Gateway a(keyword_stub("primary", "x"), cache), b(keyword_stub("secondary", "y"), cache);
    EXPECT_TRUE(parse_verdict(a.complete(screening("x"))).positive);
    EXPECT_FALSE(parse_verdict(b.complete(screening("x"))).positive);
}

TEST(Gateway, TwoTimeoutsThenSuccess) {
    auto backend = std::make_shared<FlakyBackend>(2);
    std::vector<std::chrono::milliseconds> sleeps;
    Gateway g(backend, nullptr, recording(sleeps));
    auto reply = g.complete(screening("anything"));
    EXPECT_TRUE(parse_verdict(reply).positive);
    EXPECT_EQ(backend->calls, 3);
    EXPECT_EQ(g.stats().retries, 2u);
    EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(250),
                                                              std::chrono::milliseconds(500)}));
    auto log = g.log();
    ASSERT_FALSE(log.empty());
    EXPECT_NE(log.back().find("succeeded after 2 retries"), std::string::npos);
}

TEST(Gateway, ExhaustedRetriesCarryRequestId) {
    auto backend = std::make_shared<FlakyBackend>(10);
    std::vector<std::chrono::milliseconds> sleeps;
    Gateway g(backend, nullptr, recording(sleeps));
    auto request = screening("anything");
    try {
        g.complete(request);
        FAIL();
    } catch (const BackendUnavailable& e) {
        EXPECT_EQ(e.request_id(), ResponseCache::key("flaky", request).substr(0, 12));
        EXPECT_FALSE(e.auth_failure());
    }
    EXPECT_EQ(backend->calls, 3);
    EXPECT_EQ(g.stats().failures, 1u);
}

TEST(Gateway, AuthFailureIsNotRetried) {
    auto backend = std::make_shared<FlakyBackend>(0, true);
    std::vector<std::chrono::milliseconds> sleeps;
    Gateway g(backend, nullptr, recording(sleeps));
    try {
        g.complete(screening("anything"));
        FAIL();
    } catch (const BackendUnavailable& e) {
        EXPECT_TRUE(e.auth_failure());
    }
    EXPECT_EQ(backend->calls, 1);
    EXPECT_TRUE(sleeps.empty());
}

TEST(Gateway, ConcurrencyCapHolds) {
    std::atomic<int> in_flight{0}, peak{0};
    auto slow = std::make_shared<StubBackend>("slow", [&](const PromptRequest&) {
        int now = ++in_flight;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --in_flight;
        return std::string(R"({"relevant": false})");
    });
    GatewayOptions opts;
    opts.max_concurrency = 2;
    Gateway g(slow, nullptr, opts);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&, i] { g.complete(screening("doc " + std::to_string(i))); });
    for (auto& t : threads) t.join();
    EXPECT_LE(peak.load(), 2);
    EXPECT_EQ(g.stats().network_calls, 8u);
}

TEST(StubBackend, RuleDrivenReplies) {
    json rules = {{"id", "primary"},
                  {"fail_if_any", {"explode"}},
                  {"malformed_if_any", {"garble"}},
                  {"screening", {{"rules", {{{"if_any", {"saliency", "attention"}}, {"relevant", true}, {"confidence", 0.9}}}},
                                 {"default", {{"relevant", false}, {"confidence", 0.4}}}}},
                  {"extraction", {{"rules", {{{"if_any", {"loss"}}, {"payload", {{"x", 1}}}}}}, {"default", "echo_nearest"}}}};
    StubBackend stub(rules);
    auto hit = parse_verdict(stub.send(screening("Attention heads explained")));
    EXPECT_TRUE(hit.positive);
    EXPECT_EQ(hit.evidence, "attention");
    auto miss = parse_verdict(stub.send(screening("Bar charts")));
    EXPECT_FALSE(miss.positive);
    EXPECT_DOUBLE_EQ(miss.confidence, 0.4);
    EXPECT_TRUE(parse_verdict(stub.send(screening("garble"))).malformed);
    EXPECT_THROW(stub.send(screening("explode")), TransientError);

    auto ex = PromptRequest::make(kExtractionSchema, {{"a#Figure 1", "cap", json{{"y", 2}}}}, "t", "Loss curve");
    EXPECT_EQ(stub.send(ex), R"({"x":1})");
    ex.target = "unrelated";
    EXPECT_EQ(stub.send(ex), R"({"y":2})");
    ex.exemplars.clear();
    EXPECT_EQ(stub.send(ex), "{}");
}
