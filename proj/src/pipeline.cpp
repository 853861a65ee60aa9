#include "litmine/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "litmine/analysis.hpp"
#include "litmine/hash.hpp"
#include "litmine/io.hpp"
#include "litmine/library.hpp"

namespace litmine::pipeline {

using nlohmann::json;

MissingUpstream::MissingUpstream(std::string stage, std::string producer, const fs::path& file)
    : Error(stage + " needs " + file.string() + "; run '" + producer + "' first"), producer_(std::move(producer)) {}

fs::path sibling(const fs::path& out, std::string_view suffix) {
    auto p = out;
    p.replace_extension();
    p += std::string(suffix);
    return p;
}

namespace {

void write_json(const fs::path& path, const json& j) { io::write_atomic(path, j.dump(2) + "\n"); }

void write_lines(const fs::path& path, const std::vector<json>& lines) { io::write_atomic(path, io::to_jsonl(lines)); }

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::vector<PaperRecord> read_papers(const fs::path& path) {
    std::vector<PaperRecord> out;
    for (const auto& j : io::read_jsonl(path)) out.push_back(paper_from_json(j));
    return out;
}

std::string papers_jsonl(std::span<const PaperRecord> papers) {
    std::vector<json> lines;
    for (const auto& p : papers) lines.push_back(to_json(p));
    return io::to_jsonl(lines);
}

LabeledPool read_pool(const fs::path& path, const Corpus* corpus) {
    Corpus own;
    std::vector<json> assignments;
    for (const auto& j : io::read_jsonl(path)) {
        if (j.is_object() && j.contains("title")) {
            auto rec = paper_from_json(j);
            if (!own.add(rec)) throw InputError(path.string() + ": duplicate pool record " + rec.paper_id);
            assignments.push_back({{"paper_id", rec.paper_id}, {"label", to_string(rec.label)}});
        } else {
            assignments.push_back(j);
        }
    }
    // records given inline win; the rest are looked up in the corpus
    if (corpus)
        for (const auto& rec : corpus->records())
            if (!own.contains(rec.paper_id)) own.add(rec);
    auto parsed = assignments_from_json(assignments);
    return load_labeled_pool(own, parsed);
}

std::vector<figctx::FigureEvidence> read_evidence(const fs::path& path, bool selected_only) {
    std::vector<figctx::FigureEvidence> out;
    for (const auto& j : io::read_jsonl(path)) {
        if (selected_only && j.is_object() && j.contains("selected") && !j["selected"].get<bool>()) continue;
        out.push_back(figctx::evidence_from_json(j));
    }
    return out;
}

std::vector<std::pair<std::string, fs::path>> read_document_manifest(const fs::path& path) {
    auto j = io::read_json(path);
    if (j.is_object() && j.contains("documents")) j = j["documents"];
    std::vector<std::pair<std::string, fs::path>> out;
    auto dir = path.parent_path();
    auto add = [&](const std::string& id, const std::string& file) {
        fs::path p = file;
        out.emplace_back(id, p.is_absolute() ? p : dir / p);
    };
    if (j.is_object()) {
        for (const auto& [id, file] : j.items()) {
            if (!file.is_string()) throw InputError(path.string() + ": file for " + id + " must be a string");
            add(id, file.get<std::string>());
        }
    } else if (j.is_array()) {
        for (const auto& e : j) {
            if (!e.is_object() || !e.contains("paper_id") || !e.contains("file"))
                throw InputError(path.string() + ": entries need \"paper_id\" and \"file\"");
            add(e["paper_id"].get<std::string>(), e["file"].get<std::string>());
        }
    } else {
        throw InputError(path.string() + ": expected an object or a list");
    }
    std::sort(out.begin(), out.end());
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].first == out[i - 1].first) throw InputError(path.string() + ": duplicate paper " + out[i].first);
    return out;
}

StageIO ingest(const fs::path& raw, std::span<const std::string> keywords, int reference_year,
               const fs::path& papers_out, const fs::path& candidates_out, const fs::path& report_out) {
    std::ifstream in(raw);
    if (!in) throw InputError("cannot open " + raw.string());
    auto result = ingest_metadata(in, reference_year);
    auto candidates = keyword_prefilter(result.corpus, keywords);
    ensure_parent(papers_out);
    ensure_parent(candidates_out);
    ensure_parent(report_out);
    io::write_atomic(papers_out, papers_jsonl(result.corpus.records()));
    io::write_atomic(candidates_out, papers_jsonl(candidates.records()));
    auto report = result.report.to_json();
    report["candidates"] = candidates.size();
    write_json(report_out, report);

    StageIO io{{raw}, {papers_out, candidates_out, report_out}, {}, {}};
    io.summary = {{"accepted", result.report.accepted},
                  {"rejected", result.report.rejected},
                  {"dropped_duplicates", result.report.dropped_duplicates},
                  {"candidates", candidates.size()}};
    io.warnings = result.report.warnings;
    io.warnings.insert(io.warnings.end(), result.report.errors.begin(), result.report.errors.end());
    return io;
}

StageIO screen(const fs::path& candidates_file, const fs::path& pool_file, const fs::path* pool_corpus,
               const stage1::Options& options, std::span<llm::Gateway* const> gateways, const fs::path& out) {
    Corpus candidates(read_papers(candidates_file));
    StageIO io{{candidates_file, pool_file}, {}, {}, {}};
    std::optional<Corpus> lookup;
    if (pool_corpus) {
        lookup.emplace(read_papers(*pool_corpus));
        io.inputs.push_back(*pool_corpus);
    }
    auto pool = read_pool(pool_file, lookup ? &*lookup : &candidates);
    auto result = stage1::run_stage1(candidates, pool, gateways, options);

    std::vector<json> log;
    for (const auto& e : result.log) log.push_back(e.to_json());
    ensure_parent(out);
    auto log_path = sibling(out, ".log.jsonl");
    auto retry_path = sibling(out, ".retry.json");
    io::write_atomic(out, papers_jsonl(result.modelvis));
    write_lines(log_path, log);
    write_json(retry_path, result.retry);
    io.outputs = {out, log_path, retry_path};

    std::size_t pos = 0, neg = 0, undecided = 0;
    for (const auto& e : result.log) {
        if (e.source != "screened") continue;
        if (e.decision == stage1::Decision::positive) ++pos;
        if (e.decision == stage1::Decision::negative) ++neg;
        if (e.decision == stage1::Decision::undecided) ++undecided;
    }
    io.summary = {{"candidates", candidates.size()}, {"pool", pool.size()},     {"positive", pos},
                  {"negative", neg},                 {"undecided", undecided}, {"modelvis", result.modelvis.size()}};
    return io;
}

StageIO evidence(const fs::path& documents, const fs::path* papers, const fs::path& out) {
    StageIO io{{documents}, {}, {}, {}};
    std::optional<Corpus> keep;
    if (papers) {
        keep.emplace(read_papers(*papers));
        io.inputs.push_back(*papers);
    }
    std::vector<json> lines;
    std::vector<json> log;
    std::size_t docs = 0;
    std::set<std::string> seen;
    for (const auto& [paper_id, file] : read_document_manifest(documents)) {
        if (keep && !keep->contains(paper_id)) continue;
        seen.insert(paper_id);
        ++docs;
        json entry = {{"paper_id", paper_id}, {"file", file.filename().string()}};
        try {
            auto doc = figctx::process_document(io::read_text(file), paper_id);
            for (const auto& f : doc.figures) lines.push_back(figctx::to_json(f));
            entry["figures"] = doc.figures.size();
            entry["warnings"] = doc.warnings;
            for (const auto& w : doc.warnings) io.warnings.push_back(w);
        } catch (const Error& e) {
            // keep the log free of absolute paths so runs compare byte for byte
            std::string msg = e.what();
            if (auto at = msg.find(file.string()); at != std::string::npos)
                msg.replace(at, file.string().size(), file.filename().string());
            entry["error"] = msg;
            io.warnings.push_back(paper_id + ": " + msg);
        }
        log.push_back(std::move(entry));
    }
    if (keep)
        for (const auto& p : keep->records())
            if (!seen.contains(p.paper_id)) io.warnings.push_back(p.paper_id + ": no document text");
    ensure_parent(out);
    auto log_path = sibling(out, ".log.jsonl");
    write_lines(out, lines);
    write_lines(log_path, log);
    io.outputs = {out, log_path};
    io.summary = {{"documents", docs}, {"figures", lines.size()}};
    return io;
}

StageIO detect(const fs::path& papers_file, const fs::path& evidence_file, const fs::path& library_file,
               const stage3::LabelVocabulary& vocab, const stage2::Options& options, llm::Gateway& gateway,
               const fs::path& out) {
    auto papers = read_papers(papers_file);
    auto figures = read_evidence(evidence_file);
    auto library = load_library(library_file, vocab);
    auto result = stage2::run_stage2(papers, figures, library, gateway, options);

    std::map<std::pair<std::string, std::string>, const figctx::FigureEvidence*> by_id;
    for (const auto& f : figures) by_id[{f.paper_id, f.figure_id}] = &f;
    std::vector<json> lines;
    std::size_t selected = 0;
    for (const auto& v : result.verdicts) {
        json line = json::object();
        if (auto it = by_id.find({v.paper_id, v.figure_id}); it != by_id.end()) line = figctx::to_json(*it->second);
        line.update(v.to_json());
        lines.push_back(std::move(line));
        selected += v.selected;
    }
    ensure_parent(out);
    auto retry_path = sibling(out, ".retry.json");
    write_lines(out, lines);
    write_json(retry_path, result.retry);

    StageIO io{{papers_file, evidence_file, library_file}, {out, retry_path}, {}, result.warnings};
    io.summary = {{"papers", papers.size()},
                  {"figures", result.verdicts.size()},
                  {"selected", selected},
                  {"withheld", result.retry.size()},
                  {"excluded_papers", result.excluded_papers}};
    return io;
}

StageIO extract(const fs::path& figures_file, const fs::path& library_file, const stage3::LabelVocabulary& vocab,
                const stage3::Options& options, llm::Gateway& gateway, const fs::path& out) {
    auto targets = read_evidence(figures_file, true);
    auto library = load_library(library_file, vocab, options.tokenizer);
    auto corpus = stage3::build_figure_corpus(library, options);
    auto result = stage3::run_stage3(targets, corpus, gateway, vocab, options);

    std::vector<json> labels;
    for (const auto& l : result.labels) labels.push_back(stage3::to_json(l));
    std::vector<json> per_figure;
    for (const auto& f : result.figures) {
        json exemplars = json::array();
        for (const auto& h : f.exemplars) exemplars.push_back(h.doc_id);
        json line = {{"paper_id", f.target.paper_id}, {"figure_id", f.target.figure_id}, {"exemplars", exemplars}};
        if (f.labels) line["labels"] = stage3::to_json(*f.labels);
        if (!f.error.empty()) line["error"] = f.error;
        per_figure.push_back(std::move(line));
    }
    ensure_parent(out);
    auto figures_path = sibling(out, ".figures.jsonl");
    auto retry_path = sibling(out, ".retry.json");
    write_lines(out, labels);
    write_lines(figures_path, per_figure);
    write_json(retry_path, result.retry);

    std::size_t flagged = 0;
    for (const auto& l : result.labels) flagged += l.flagged;
    StageIO io{{figures_file, library_file}, {out, figures_path, retry_path}, {}, corpus.warnings};
    io.summary = {{"figures", targets.size()},
                  {"base_figures", result.labels.size()},
                  {"flagged", flagged},
                  {"withheld", result.retry.size()}};
    return io;
}

StageIO analyze(const fs::path& labels_file, const fs::path& papers_file, const stage3::LabelVocabulary& vocab,
                int reference_year, const fs::path& out_dir) {
    std::vector<stage3::FrameworkLabels> labels;
    for (const auto& j : io::read_jsonl(labels_file)) labels.push_back(stage3::labels_from_json(j, vocab));
    Corpus papers(read_papers(papers_file));
    auto exports = analysis::build_exports(labels, papers, vocab, reference_year);
    fs::create_directories(out_dir);
    StageIO io{{labels_file, papers_file}, {}, {}, exports.warnings};
    auto put = [&](const char* name, const std::string& content) {
        io::write_atomic(out_dir / name, content);
        io.outputs.push_back(out_dir / name);
    };
    put("sankey.json", exports.sankey_json);
    put("trends.csv", exports.trends_csv);
    put("weights.csv", exports.weights_csv);
    put("paths.jsonl", exports.paths_jsonl);
    auto sankey = json::parse(exports.sankey_json);
    io.summary = {{"figures", labels.size()}, {"paths", sankey["path_count"]}, {"edge_counts", sankey["edge_counts"]}};
    return io;
}

StageIO evaluate(const fs::path& pool_file, const fs::path* pool_corpus, const fs::path& library_file,
                 const stage3::LabelVocabulary& vocab, const eval::LooConfig& config,
                 std::span<llm::Gateway* const> gateways, const fs::path& out) {
    StageIO io;
    std::optional<LabeledPool> pool;
    std::optional<FigureLibrary> library;
    auto cfg = config;
    if (!pool_file.empty() && cfg.stages.contains(1)) {
        std::optional<Corpus> lookup;
        if (pool_corpus) {
            lookup.emplace(read_papers(*pool_corpus));
            io.inputs.push_back(*pool_corpus);
        }
        pool.emplace(read_pool(pool_file, lookup ? &*lookup : nullptr));
        io.inputs.push_back(pool_file);
    } else {
        cfg.stages.erase(1);
    }
    if (!library_file.empty() && (cfg.stages.contains(2) || cfg.stages.contains(3))) {
        library.emplace(load_library(library_file, vocab, cfg.stage3.tokenizer));
        io.inputs.push_back(library_file);
    } else {
        cfg.stages.erase(2);
        cfg.stages.erase(3);
    }
    if (cfg.stages.empty()) throw ContractError("eval: nothing to evaluate (needs a pool or a coded library)");
    auto report = eval::run_loo(pool ? &*pool : nullptr, library ? &*library : nullptr, gateways, vocab, cfg);
    auto leaks = eval::find_leakage(report.folds);
    auto j = report.to_json();
    j["leakage"] = leaks;
    ensure_parent(out);
    write_json(out, j);
    io.outputs = {out};
    io.warnings = report.failures;
    io.warnings.insert(io.warnings.end(), leaks.begin(), leaks.end());
    json rows = json::array();
    for (const auto& r : report.rows)
        rows.push_back(std::to_string(r.stage) + " " + r.method + " " + r.model + " " + r.target + " " + r.metric + "=" +
                       (r.score.flagged ? std::string("n/a") : std::to_string(r.score.value)));
    io.summary = {{"rows", rows}, {"failures", report.failures.size()}, {"leakage", leaks.size()}};
    return io;
}

json RunManifest::to_json() const {
    json stages_json = json::array();
    for (const auto& s : stages) {
        auto hashes = [](const std::vector<fs::path>& files) {
            json out = json::object();
            for (const auto& f : files) {
                auto abs = fs::absolute(f).lexically_normal().string();
                out[abs] = fs::exists(f) ? sha256_file(f) : "";
            }
            return out;
        };
        json entry = {{"stage", s.stage},
                      {"started", s.started},
                      {"finished", s.finished},
                      {"inputs", hashes(s.io.inputs)},
                      {"outputs", hashes(s.io.outputs)},
                      {"summary", s.io.summary},
                      {"warnings", s.io.warnings}};
        if (!s.error.empty()) entry["error"] = s.error;
        stages_json.push_back(std::move(entry));
    }
    return {{"version", kVersion}, {"config_hash", config_hash}, {"stages", stages_json}, {"cache", cache}};
}

RunManifest run_pipeline(const RunConfig& config, std::span<const std::string> stages, GatewaySet& gateways) {
    for (const auto& s : stages)
        if (std::find(kStages.begin(), kStages.end(), s) == kStages.end())
            throw ContractError("unknown stage '" + s + "'");
    Layout layout{resolve(config, config.out_dir)};
    fs::create_directories(layout.dir);
    auto vocab = load_vocabulary(resolve(config, config.vocabulary), resolve(config, config.aliases));

    RunManifest manifest;
    manifest.config_hash = sha256_hex(config.raw.dump());

    auto require = [](const std::string& stage, const std::string& producer, const fs::path& file) {
        if (!fs::exists(file)) throw MissingUpstream(stage, producer, file);
        return file;
    };
    auto require_config = [](const std::string& stage, const char* key, const fs::path& file) {
        if (file.empty()) throw ContractError(stage + " needs paths." + key + " in the config");
        return file;
    };

    for (auto name : kStages) {
        std::string stage(name);
        if (std::find(stages.begin(), stages.end(), stage) == stages.end()) continue;
        StageRecord record{stage, utc_now(), {}, {}, {}};
        try {
            if (stage == "ingest") {
                record.io = ingest(resolve(config, require_config(stage, "corpus", config.corpus)), config.keywords,
                                   config.reference_year, layout.papers(), layout.candidates(), layout.ingest_report());
            } else if (stage == "stage1") {
                auto papers = require(stage, "ingest", layout.papers());
                record.io = screen(require(stage, "ingest", layout.candidates()),
                                   resolve(config, require_config(stage, "pool", config.pool)), &papers, config.stage1,
                                   gateways.all(), layout.modelvis());
            } else if (stage == "evidence") {
                auto papers = require(stage, "stage1", layout.modelvis());
                record.io = evidence(resolve(config, require_config(stage, "documents", config.documents)), &papers,
                                     layout.evidence());
            } else if (stage == "stage2") {
                auto papers = require(stage, "stage1", layout.modelvis());
                auto evidence_file = require(stage, "evidence", layout.evidence());
                record.io = detect(papers, evidence_file,
                                   resolve(config, require_config(stage, "library", config.library)), vocab,
                                   config.stage2, gateways.get(config.figure_backend), layout.figures());
            } else if (stage == "stage3") {
                record.io = extract(require(stage, "stage2", layout.figures()),
                                    resolve(config, require_config(stage, "library", config.library)), vocab,
                                    config.stage3, gateways.get(config.figure_backend), layout.labels());
            } else if (stage == "analyze") {
                record.io = analyze(require(stage, "stage3", layout.labels()), require(stage, "ingest", layout.papers()),
                                    vocab, config.reference_year, layout.analysis());
            } else if (stage == "eval") {
                auto papers = require(stage, "ingest", layout.papers());
                std::vector<llm::Gateway*> ordered;
                if (!config.figure_backend.empty()) ordered.push_back(&gateways.get(config.figure_backend));
                for (auto* g : gateways.all())
                    if (std::find(ordered.begin(), ordered.end(), g) == ordered.end()) ordered.push_back(g);
                record.io = evaluate(resolve(config, config.pool), &papers, resolve(config, config.library), vocab,
                                     config.eval, ordered, layout.eval_report());
            }
        } catch (const std::exception& e) {
            record.error = e.what();
            record.finished = utc_now();
            manifest.stages.push_back(std::move(record));
            manifest.cache = gateways.stats();
            write_json(layout.manifest(), manifest.to_json());
            throw;
        }
        record.finished = utc_now();
        manifest.stages.push_back(std::move(record));
        manifest.cache = gateways.stats();
        write_json(layout.manifest(), manifest.to_json());
    }
    return manifest;
}

std::vector<std::string> verify_manifest(const fs::path& path) {
    auto j = io::read_json(path);
    std::vector<std::string> out;
    for (const auto& stage : j.at("stages"))
        for (const char* side : {"inputs", "outputs"})
            for (const auto& [file, hash] : stage.at(side).items()) {
                auto now = fs::exists(file) ? sha256_file(file) : std::string{};
                if (now != hash.get<std::string>()) out.push_back(file);
            }
    return out;
}

}  // namespace litmine::pipeline
