#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "litmine/config.hpp"
#include "litmine/io.hpp"
#include "litmine/pipeline.hpp"
#include "litmine/text.hpp"

namespace fs = std::filesystem;
using namespace litmine;
using nlohmann::json;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> stubs;
    std::optional<std::size_t> threads;
    std::string cache_dir;
};

class ValidationFailure : public Error {
  public:
    explicit ValidationFailure(std::vector<std::string> errors) : Error("invalid configuration"), errors(std::move(errors)) {}
    std::vector<std::string> errors;
};

RunConfig load(const Common& common, bool validate) {
    RunConfig config;
    std::vector<std::string> errors;
    if (!common.config_path.empty()) {
        auto loaded = load_config(common.config_path);
        config = std::move(loaded.config);
        errors = std::move(loaded.errors);
        if (validate && errors.empty()) errors = validate_config(config);
    } else {
        config.base_dir = fs::current_path();
    }
    for (std::size_t i = 0; i < common.stubs.size(); ++i) {
        auto rules = io::read_json(common.stubs[i]);
        auto id = rules.value("id", "stub" + std::to_string(i + 1));
        config.backends.push_back({id, "stub", {{"id", id}, {"type", "stub"}, {"rules", rules}}});
    }
    if (common.threads) {
        config.threads = *common.threads;
        config.stage1.threads = config.stage2.threads = config.stage3.threads = config.eval.threads = *common.threads;
    }
    if (!common.cache_dir.empty()) config.cache_dir = fs::absolute(common.cache_dir);
    if (!errors.empty()) throw ValidationFailure(errors);
    return config;
}

void report(const pipeline::StageIO& io, const GatewaySet* gateways) {
    for (const auto& w : io.warnings) std::cerr << "warning: " << w << '\n';
    if (gateways)
        for (const auto& g : gateways->gateways)
            for (const auto& line : g->log()) std::cerr << line << '\n';
    auto summary = io.summary;
    if (gateways) summary["llm"] = gateways->stats();
    std::cout << summary.dump(2) << '\n';
}

std::vector<std::string> csv_list(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& part : text::split(s, ',')) {
        auto t = text::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

fs::path opt_path(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--config", common.config_path, "Run configuration (JSON)");
    cmd->add_option("--stub", common.stubs, "Stub backend rules file (repeatable)");
    cmd->add_option("--threads", common.threads, "Worker threads");
    cmd->add_option("--cache-dir", common.cache_dir, "Response cache directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented literature mining toolkit"};
    app.require_subcommand(1);
    Common common;
    int exit_code = 0;

    // ingest
    std::string in_corpus, out_papers, out_candidates, out_report, keywords;
    std::optional<int> ref_year;
    auto* ingest = app.add_subcommand("ingest", "Normalize, deduplicate and keyword-filter paper metadata");
    add_common(ingest, common);
    ingest->add_option("--corpus", in_corpus, "Raw metadata (JSONL)");
    ingest->add_option("--out", out_papers, "Accepted papers (JSONL)")->required();
    ingest->add_option("--candidates", out_candidates, "Keyword-filtered candidates (JSONL)");
    ingest->add_option("--report", out_report, "Ingest report (JSON)");
    ingest->add_option("--keywords", keywords, "Comma-separated prefilter keywords");
    ingest->add_option("--ref-year", ref_year, "Latest admissible publication year");

    // stage1
    std::string s1_corpus, s1_pool, s1_out;
    std::optional<std::size_t> s1_k, s1_min_pos, s1_min_neg;
    auto* stage1 = app.add_subcommand("stage1", "Screen candidate papers with consensus of two backends");
    add_common(stage1, common);
    stage1->add_option("--corpus", s1_corpus, "Candidate papers (JSONL)")->required();
    stage1->add_option("--pool", s1_pool, "Labelled pool (JSONL)")->required();
    stage1->add_option("--k", s1_k, "Few-shot exemplars");
    stage1->add_option("--min-pos", s1_min_pos, "Minimum positive exemplars");
    stage1->add_option("--min-neg", s1_min_neg, "Minimum negative exemplars");
    stage1->add_option("--out", s1_out, "ModelVis papers (JSONL)")->required();

    // evidence
    std::string ev_manifest, ev_papers, ev_out;
    auto* evidence = app.add_subcommand("evidence", "Extract caption and context evidence from paper text");
    evidence->add_option("--manifest", ev_manifest, "paper_id -> text file manifest (JSON)")->required();
    evidence->add_option("--papers", ev_papers, "Only these papers (JSONL)");
    evidence->add_option("--out", ev_out, "Figure evidence (JSONL)")->required();

    // stage2
    std::string s2_papers, s2_evidence, s2_library, s2_out, vocab_path, alias_path;
    std::optional<std::size_t> s2_k, s2_max;
    auto* stage2 = app.add_subcommand("stage2", "Detect relevant figures and pick representatives");
    add_common(stage2, common);
    stage2->add_option("--papers", s2_papers, "ModelVis papers (JSONL)")->required();
    stage2->add_option("--evidence", s2_evidence, "Figure evidence (JSONL)")->required();
    stage2->add_option("--library", s2_library, "Coded papers (JSONL)")->required();
    stage2->add_option("--k", s2_k, "Neighbour papers");
    stage2->add_option("--max-figs", s2_max, "Representative figures per paper");
    stage2->add_option("--vocab", vocab_path, "Label vocabulary (JSON)");
    stage2->add_option("--alias", alias_path, "Alias map (JSON)");
    stage2->add_option("--out", s2_out, "Figure verdicts (JSONL)")->required();

    // stage3
    std::string s3_figures, s3_library, s3_out;
    std::optional<std::size_t> s3_k, s3_cap;
    auto* stage3 = app.add_subcommand("stage3", "Label selected figures with the four-field framework");
    add_common(stage3, common);
    stage3->add_option("--figures", s3_figures, "Selected figures (JSONL)")->required();
    stage3->add_option("--library", s3_library, "Coded papers (JSONL)")->required();
    stage3->add_option("--vocab", vocab_path, "Label vocabulary (JSON)");
    stage3->add_option("--alias", alias_path, "Alias map (JSON)");
    stage3->add_option("--k", s3_k, "Exemplar figures");
    stage3->add_option("--cap", s3_cap, "Exemplars per source paper");
    stage3->add_option("--out", s3_out, "Framework labels (JSONL)")->required();

    // eval
    std::string e_pool, e_corpus, e_figures, e_stages = "1,2,3", e_out;
    std::optional<std::string> e_shots;
    std::optional<std::size_t> e_baseline;
    auto* evalc = app.add_subcommand("eval", "Leave-one-out evaluation");
    add_common(evalc, common);
    evalc->add_option("--pool", e_pool, "Labelled pool (JSONL)");
    evalc->add_option("--corpus", e_corpus, "Papers the pool ids refer to (JSONL)");
    evalc->add_option("--figures", e_figures, "Coded papers with figure labels (JSONL)");
    evalc->add_option("--stages", e_stages, "Stages to evaluate, e.g. 1,2,3");
    evalc->add_option("--shots", e_shots, "Shot settings: n for all stages or s:n, comma-separated");
    evalc->add_option("--baseline-k", e_baseline, "Neighbours for the BM25 majority baseline");
    evalc->add_option("--vocab", vocab_path, "Label vocabulary (JSON)");
    evalc->add_option("--alias", alias_path, "Alias map (JSON)");
    evalc->add_option("--out", e_out, "Report (JSON)")->required();

    // analyze
    std::string a_labels, a_papers, a_out;
    auto* analyzec = app.add_subcommand("analyze", "Paths, Sankey flows, trends and citation weighting");
    analyzec->add_option("--labels", a_labels, "Framework labels (JSONL)")->required();
    analyzec->add_option("--papers", a_papers, "Paper metadata (JSONL)")->required();
    analyzec->add_option("--ref-year", ref_year, "Reference year for citation weights");
    analyzec->add_option("--vocab", vocab_path, "Label vocabulary (JSON)");
    analyzec->add_option("--alias", alias_path, "Alias map (JSON)");
    analyzec->add_option("--out-dir", a_out, "Output directory")->required();

    // run
    std::string r_stages;
    auto* run = app.add_subcommand("run", "Run pipeline stages from a configuration file");
    add_common(run, common);
    run->add_option("--stages", r_stages, "Comma-separated stages (default: all)");

    // validate
    auto* check = app.add_subcommand("validate", "Check a configuration file");
    add_common(check, common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            auto config = load(common, false);
            auto corpus = in_corpus.empty() ? resolve(config, config.corpus) : fs::path(in_corpus);
            if (corpus.empty()) throw ContractError("ingest needs --corpus");
            if (!keywords.empty()) config.keywords = csv_list(keywords);
            fs::path papers = out_papers;
            report(pipeline::ingest(corpus, config.keywords, ref_year.value_or(config.reference_year), papers,
                                    opt_path(out_candidates, pipeline::sibling(papers, ".candidates.jsonl")),
                                    opt_path(out_report, pipeline::sibling(papers, ".report.json"))),
                   nullptr);
        } else if (stage1->parsed()) {
            auto config = load(common, false);
            if (s1_k) config.stage1.k = *s1_k;
            if (s1_min_pos) config.stage1.min_pos = *s1_min_pos;
            if (s1_min_neg) config.stage1.min_neg = *s1_min_neg;
            auto gateways = make_gateways(config);
            report(pipeline::screen(s1_corpus, s1_pool, nullptr, config.stage1, gateways.all(), s1_out), &gateways);
        } else if (evidence->parsed()) {
            fs::path papers = ev_papers;
            report(pipeline::evidence(ev_manifest, ev_papers.empty() ? nullptr : &papers, ev_out), nullptr);
        } else if (stage2->parsed()) {
            auto config = load(common, false);
            if (s2_k) config.stage2.k = *s2_k;
            if (s2_max) config.stage2.max_figures = *s2_max;
            auto vocab = load_vocabulary(opt_path(vocab_path, resolve(config, config.vocabulary)),
                                         opt_path(alias_path, resolve(config, config.aliases)));
            auto gateways = make_gateways(config);
            report(pipeline::detect(s2_papers, s2_evidence, s2_library, vocab, config.stage2,
                                    gateways.get(config.figure_backend), s2_out),
                   &gateways);
        } else if (stage3->parsed()) {
            auto config = load(common, false);
            if (s3_k) config.stage3.k = *s3_k;
            if (s3_cap) config.stage3.per_paper_cap = *s3_cap;
            auto vocab = load_vocabulary(opt_path(vocab_path, resolve(config, config.vocabulary)),
                                         opt_path(alias_path, resolve(config, config.aliases)));
            auto gateways = make_gateways(config);
            report(pipeline::extract(s3_figures, s3_library, vocab, config.stage3, gateways.get(config.figure_backend),
                                     s3_out),
                   &gateways);
        } else if (evalc->parsed()) {
            auto config = load(common, false);
            auto loo = config.eval;
            loo.stages.clear();
            for (const auto& s : csv_list(e_stages)) {
                if (s != "1" && s != "2" && s != "3") throw ValidationFailure({"--stages: unknown stage '" + s + "'"});
                loo.stages.insert(s[0] - '0');
            }
            if (e_shots) apply_shots(*e_shots, loo);
            if (e_baseline) loo.baseline_k = *e_baseline;
            auto vocab = load_vocabulary(opt_path(vocab_path, resolve(config, config.vocabulary)),
                                         opt_path(alias_path, resolve(config, config.aliases)));
            auto gateways = make_gateways(config);
            std::vector<llm::Gateway*> ordered;
            if (!config.figure_backend.empty()) ordered.push_back(&gateways.get(config.figure_backend));
            for (auto* g : gateways.all())
                if (std::find(ordered.begin(), ordered.end(), g) == ordered.end()) ordered.push_back(g);
            fs::path corpus = e_corpus;
            report(pipeline::evaluate(e_pool, e_corpus.empty() ? nullptr : &corpus, e_figures, vocab, loo, ordered,
                                      e_out),
                   &gateways);
        } else if (analyzec->parsed()) {
            auto vocab = load_vocabulary(vocab_path, alias_path);
            report(pipeline::analyze(a_labels, a_papers, vocab, ref_year.value_or(2026), a_out), nullptr);
        } else if (check->parsed()) {
            if (common.config_path.empty()) throw ValidationFailure({"--config is required"});
            load(common, true);
            std::cout << "configuration ok\n";
        } else if (run->parsed()) {
            if (common.config_path.empty()) throw ValidationFailure({"--config is required"});
            auto config = load(common, true);
            std::vector<std::string> stages;
            if (r_stages.empty())
                for (auto s : pipeline::kStages) stages.emplace_back(s);
            else
                stages = csv_list(r_stages);
            for (const auto& s : stages)
                if (std::find(pipeline::kStages.begin(), pipeline::kStages.end(), s) == pipeline::kStages.end())
                    throw ValidationFailure({"--stages: unknown stage '" + s + "'"});
            auto gateways = make_gateways(config);
            auto manifest = pipeline::run_pipeline(config, stages, gateways);
            for (const auto& g : gateways.gateways)
                for (const auto& line : g->log()) std::cerr << line << '\n';
            json summary = json::object();
            for (const auto& s : manifest.stages) {
                for (const auto& w : s.io.warnings) std::cerr << "warning: " << s.stage << ": " << w << '\n';
                summary[s.stage] = s.io.summary;
            }
            summary["llm"] = manifest.cache;
            std::cout << summary.dump(2) << '\n';
        }
    } catch (const ValidationFailure& e) {
        for (const auto& err : e.errors) std::cerr << "error: " << err << '\n';
        exit_code = 1;
    } catch (const pipeline::MissingUpstream& e) {
        std::cerr << "error: " << e.what() << '\n';
        exit_code = 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        exit_code = 2;
    }
    return exit_code;
}
