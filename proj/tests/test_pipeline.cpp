#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>

#include "litmine/error.hpp"
#include "litmine/hash.hpp"
#include "litmine/io.hpp"
#include "litmine/pipeline.hpp"
#include "support.hpp"

using namespace litmine;
using namespace litmine::pipeline;
using nlohmann::json;
using testing_support::fixture_dir;
using testing_support::TempDir;

namespace {

std::vector<std::string> all_stages() { return {kStages.begin(), kStages.end()}; }

// Copies the fixture into `dir` and loads its config with overrides.
RunConfig fixture_config(const TempDir& dir, std::size_t threads, const fs::path& cache = {}) {
    fs::copy(fixture_dir(), dir.path() / "fx", fs::copy_options::recursive);
    auto load = load_config(dir.path() / "fx" / "config.json");
    EXPECT_TRUE(load.errors.empty());
    auto c = load.config;
    c.threads = c.stage1.threads = c.stage2.threads = c.stage3.threads = c.eval.threads = threads;
    c.cache_dir = cache;
    return c;
}

// Every output file except the manifest (it carries timestamps and absolute paths).
std::map<std::string, std::string> outputs(const fs::path& out) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(out))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            files[fs::relative(e.path(), out).string()] = io::read_text(e.path());
    return files;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(LITMINE_CLI) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json expected() { return io::read_json(fixture_dir() / "expected.json"); }

}  // namespace

TEST(Pipeline, FixtureStagesMatchHandTrace) {
    TempDir dir;
    auto config = fixture_config(dir, 1);
    auto gateways = make_gateways(config);
    auto manifest = run_pipeline(config, all_stages(), gateways);
    ASSERT_EQ(manifest.stages.size(), kStages.size());
    Layout layout{resolve(config, config.out_dir)};
    auto want = expected();

    std::vector<std::string> modelvis;
    for (const auto& p : read_papers(layout.modelvis())) modelvis.push_back(p.paper_id);
    EXPECT_EQ(modelvis, want["stage1"]["modelvis"].get<std::vector<std::string>>());
    EXPECT_EQ(io::read_json(sibling(layout.modelvis(), ".retry.json")), want["stage1"]["retry"]);

    json selected = json::object();
    std::vector<std::string> malformed;
    for (const auto& line : io::read_jsonl(layout.figures())) {
        if (line["selected"]) selected[line["paper_id"].get<std::string>()][line["figure_id"].get<std::string>()] = line["role"];
        if (line.value("malformed", false))
            malformed.push_back(line["paper_id"].get<std::string>() + "#" + line["figure_id"].get<std::string>());
    }
    EXPECT_EQ(selected, want["stage2"]["selected"]);
    EXPECT_EQ(json(malformed), want["stage2"]["malformed"]);
    EXPECT_EQ(io::read_json(sibling(layout.figures(), ".retry.json")), want["stage2"]["retry"]);
    EXPECT_EQ(manifest.stages[3].io.summary["excluded_papers"], want["stage2"]["excluded"]);

    auto labels = io::read_jsonl(layout.labels());
    const auto& want_labels = want["labels"];
    ASSERT_EQ(labels.size(), want_labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& got = labels[i];
        const auto& w = want_labels[i];
        SCOPED_TRACE(w["paper_id"].get<std::string>() + " " + w["figure_id"].get<std::string>());
        EXPECT_EQ(got["paper_id"], w["paper_id"]);
        EXPECT_EQ(got["figure_id"], w["figure_id"]);
        EXPECT_EQ(got["flagged"], w["flagged"]);
        EXPECT_EQ(got["labels"]["model_listener"]["values"], w["model_listener"]);
        EXPECT_EQ(got["labels"]["data_type"]["values"], w["data_type"]);
        EXPECT_EQ(got["labels"]["visualization_type"]["value"], w["visualization_type"]);
        EXPECT_EQ(got["labels"]["visualization_purpose"]["value"], w["visualization_purpose"]);
        std::size_t f = 0;
        for (const char* field : {"model_listener", "data_type", "visualization_type", "visualization_purpose"})
            EXPECT_NEAR(got["labels"][field]["confidence"].get<double>(), w["confidence"][f++].get<double>(), 1e-12);
    }
    EXPECT_EQ(io::read_text(layout.analysis() / "paths.jsonl").size() > 0, true);
    auto sankey = io::read_json(layout.analysis() / "sankey.json");
    EXPECT_EQ(sankey["path_count"], want["analysis"]["paths"]);
    EXPECT_EQ(sankey["figures"], want["analysis"]["figures"]);
    EXPECT_TRUE(io::read_json(layout.eval_report())["leakage"].empty());
}

TEST(Pipeline, OutputsByteIdenticalAcrossRunsAndThreads) {
    std::vector<std::map<std::string, std::string>> runs;
    for (std::size_t threads : {1u, 1u, 4u}) {
        TempDir dir;
        auto config = fixture_config(dir, threads);
        auto gateways = make_gateways(config);
        run_pipeline(config, all_stages(), gateways);
        runs.push_back(outputs(resolve(config, config.out_dir)));
    }
    ASSERT_GE(runs[0].size(), 15u);
    for (std::size_t i = 1; i < runs.size(); ++i) {
        ASSERT_EQ(runs[i].size(), runs[0].size());
        for (const auto& [name, content] : runs[0]) EXPECT_EQ(runs[i].at(name), content) << name << " run " << i;
    }
}

TEST(Pipeline, WarmCacheServesEverySuccessfulRequest) {
    TempDir cache;
    json cold, warm;
    for (json* stats : {&cold, &warm}) {
        TempDir dir;
        auto config = fixture_config(dir, 2, cache.path());
        auto gateways = make_gateways(config);
        run_pipeline(config, all_stages(), gateways);
        *stats = gateways.stats();
    }
    for (const char* id : {"primary", "secondary"}) {
        SCOPED_TRACE(id);
        EXPECT_GT(cold[id]["network_calls"].get<int>(), 10);
        // only requests that failed last time go out again
        auto failures = warm[id]["failures"].get<int>();
        EXPECT_EQ(warm[id]["requests"], cold[id]["requests"]);
        EXPECT_EQ(warm[id]["cache_hits"].get<int>(), warm[id]["requests"].get<int>() - failures);
        EXPECT_EQ(warm[id]["network_calls"].get<int>(), failures * 3);
    }
}

TEST(Pipeline, MissingUpstreamNamesProducer) {
    TempDir dir;
    auto config = fixture_config(dir, 1);
    auto gateways = make_gateways(config);
    try {
        run_pipeline(config, std::vector<std::string>{"stage2"}, gateways);
        FAIL() << "expected MissingUpstream";
    } catch (const MissingUpstream& e) {
        EXPECT_EQ(e.producer(), "stage1");
        EXPECT_NE(std::string(e.what()).find("run 'stage1' first"), std::string::npos);
    }
    auto manifest = io::read_json(resolve(config, config.out_dir) / "manifest.json");
    EXPECT_FALSE(manifest["stages"][0]["error"].get<std::string>().empty());
    EXPECT_THROW(run_pipeline(config, std::vector<std::string>{"stage9"}, gateways), ContractError);
}

TEST(Pipeline, ManifestVerifiesAndDetectsEdits) {
    TempDir dir;
    auto config = fixture_config(dir, 1);
    auto gateways = make_gateways(config);
    run_pipeline(config, std::vector<std::string>{"ingest", "stage1"}, gateways);
    Layout layout{resolve(config, config.out_dir)};
    EXPECT_TRUE(verify_manifest(layout.manifest()).empty());
    {
        std::ofstream out(layout.modelvis(), std::ios::app);
        out << "\n";
    }
    auto changed = verify_manifest(layout.manifest());
    ASSERT_EQ(changed.size(), 1u);
    EXPECT_NE(changed[0].find("modelvis.jsonl"), std::string::npos);
}

TEST(Config, EveryProblemReportedAtOnce) {
    TempDir dir;
    json bad = {{"paths", {{"corpus", "missing.jsonl"}, {"library", "nope.jsonl"}, {"extra", 1}}},
                {"stage1", {{"k", 2}, {"min_pos", 2}, {"min_neg", 2}}},
                {"stage2", {{"k", 0}}},
                {"keywords", json::array()},
                {"figure_backend", "ghost"},
                {"backends",
                 {{{"id", "a"}, {"type", "http"}, {"endpoint", "http://x"}, {"model", "m"}, {"api_key", "sk-123"}},
                  {{"id", "b"}, {"type", "http"}, {"endpoint", "http://x"}, {"model", "m"},
                   {"api_key_env", "LITMINE_SURELY_UNSET_VAR"}},
                  {{"id", "c"}, {"type", "carrier-pigeon"}},
                  {{"id", "d"}, {"type", "stub"}}}}};
    io::write_atomic(dir / "bad.json", bad.dump());
    auto load = load_config(dir / "bad.json");
    auto errors = load.errors;
    auto more = validate_config(load.config);
    errors.insert(errors.end(), more.begin(), more.end());
    std::string all;
    for (const auto& e : errors) all += e + "\n";
    for (const char* needle : {"unknown key 'extra'", "paths.corpus", "paths.library", "stage2: k must be >= 1",
                               "min_pos + min_neg exceeds k", "keywords", "ghost", "api_key_env",
                               "LITMINE_SURELY_UNSET_VAR", "carrier-pigeon", "rules"})
        EXPECT_NE(all.find(needle), std::string::npos) << needle << "\n" << all;
    EXPECT_GE(errors.size(), 11u);
}

TEST(Config, FixtureConfigIsValid) {
    auto load = load_config(fixture_dir() / "config.json");
    EXPECT_TRUE(load.errors.empty());
    EXPECT_TRUE(validate_config(load.config).empty());
    EXPECT_EQ(load.config.eval.baseline_k, 7u);
    EXPECT_EQ(load.config.figure_backend, "primary");
}

TEST(Config, ShotSpec) {
    eval::LooConfig c;
    apply_shots("0,1:6,2:5,3:10", c);
    EXPECT_EQ(c.stage1_shots, (std::vector<std::size_t>{0, 6}));
    EXPECT_EQ(c.stage2_shots, (std::vector<std::size_t>{0, 5}));
    EXPECT_EQ(c.stage3_shots, (std::vector<std::size_t>{0, 10}));
    apply_shots("3", c);
    EXPECT_EQ(c.stage2_shots, std::vector<std::size_t>{3});
    EXPECT_THROW(apply_shots("4:2", c), InputError);
    EXPECT_THROW(apply_shots("x", c), InputError);
}

TEST(Cli, ExitCodes) {
    TempDir dir;
    fs::copy(fixture_dir(), dir.path() / "fx", fs::copy_options::recursive);
    auto cfg = (dir.path() / "fx" / "config.json").string();
    EXPECT_EQ(run_cli("validate --config " + cfg), 0);
    EXPECT_EQ(run_cli("run --config " + cfg + " --stages stage2"), 1);  // upstream missing
    EXPECT_EQ(run_cli("run --config " + cfg + " --stages ingest,stage1 --threads 2"), 0);
    EXPECT_TRUE(fs::exists(dir.path() / "fx" / "out" / "modelvis.jsonl"));

    io::write_atomic(dir / "bad.json", R"({"paths": {"corpus": "missing.jsonl"}, "backends": []})");
    EXPECT_EQ(run_cli("validate --config " + (dir / "bad.json").string()), 1);

    io::write_atomic(dir / "broken.json", "{\"C01\": ");
    EXPECT_EQ(run_cli("evidence --manifest " + (dir / "broken.json").string() + " --out " + (dir / "ev.jsonl").string()),
              2);
}

TEST(Cli, SingleStageCommandsChain) {
    TempDir dir;
    fs::copy(fixture_dir(), dir.path() / "fx", fs::copy_options::recursive);
    auto fx = dir.path() / "fx";
    auto o = [&](const char* f) { return (dir.path() / f).string(); };
    auto stubs = " --stub " + (fx / "stubs" / "primary.json").string() + " --stub " + (fx / "stubs" / "secondary.json").string();
    ASSERT_EQ(run_cli("ingest --corpus " + (fx / "corpus.jsonl").string() + " --out " + o("papers.jsonl") +
                      " --candidates " + o("cand.jsonl") + " --report " + o("report.json") + " --ref-year 2026"),
              0);
    ASSERT_EQ(run_cli("stage1 --corpus " + o("cand.jsonl") + " --pool " +
                      (fx / "pool.jsonl").string() + stubs + " --out " + o("modelvis.jsonl")),
              0);
    ASSERT_EQ(run_cli("evidence --manifest " + (fx / "documents.json").string() + " --papers " + o("modelvis.jsonl") +
                      " --out " + o("evidence.jsonl")),
              0);
    ASSERT_EQ(run_cli("stage2 --papers " + o("modelvis.jsonl") + " --evidence " + o("evidence.jsonl") + " --library " +
                      (fx / "library.jsonl").string() + stubs + " --out " + o("figures.jsonl")),
              0);
    ASSERT_EQ(run_cli("stage3 --figures " + o("figures.jsonl") + " --library " + (fx / "library.jsonl").string() +
                      stubs + " --out " + o("labels.jsonl")),
              0);
    ASSERT_EQ(run_cli("analyze --labels " + o("labels.jsonl") + " --papers " + o("papers.jsonl") + " --out-dir " +
                      o("analysis")),
              0);

    // same bytes as the orchestrated run
    TempDir ref;
    auto config = fixture_config(ref, 1);
    auto gateways = make_gateways(config);
    run_pipeline(config, std::vector<std::string>{"ingest", "stage1", "evidence", "stage2", "stage3", "analyze"},
                 gateways);
    Layout layout{resolve(config, config.out_dir)};
    EXPECT_EQ(io::read_text(dir / "labels.jsonl"), io::read_text(layout.labels()));
    EXPECT_EQ(io::read_text(dir / "figures.jsonl"), io::read_text(layout.figures()));
    EXPECT_EQ(io::read_text(dir.path() / "analysis" / "sankey.json"), io::read_text(layout.analysis() / "sankey.json"));
}
