#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "litmine/config.hpp"
#include "litmine/corpus.hpp"
#include "litmine/error.hpp"
#include "litmine/figctx.hpp"

namespace litmine::pipeline {

namespace fs = std::filesystem;

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr std::array<std::string_view, 7> kStages = {"ingest", "stage1", "evidence", "stage2",
                                                            "stage3", "analyze", "eval"};

/// A stage's input is missing; names the stage that produces it.
class MissingUpstream : public Error {
  public:
    MissingUpstream(std::string stage, std::string producer, const fs::path& file);
    const std::string& producer() const { return producer_; }

  private:
    std::string producer_;
};

/// `out` with its extension replaced: sibling("a/modelvis.jsonl", ".log.jsonl") = "a/modelvis.log.jsonl".
fs::path sibling(const fs::path& out, std::string_view suffix);

/// Output file names under the run directory.
struct Layout {
    fs::path dir;

    fs::path papers() const { return dir / "papers.jsonl"; }
    fs::path candidates() const { return dir / "candidates.jsonl"; }
    fs::path ingest_report() const { return dir / "ingest_report.json"; }
    fs::path modelvis() const { return dir / "modelvis.jsonl"; }
    fs::path evidence() const { return dir / "evidence.jsonl"; }
    fs::path figures() const { return dir / "figures.jsonl"; }
    fs::path labels() const { return dir / "labels.jsonl"; }
    fs::path analysis() const { return dir / "analysis"; }
    fs::path eval_report() const { return dir / "eval_report.json"; }
    fs::path manifest() const { return dir / "manifest.json"; }
};

/// What one stage read and wrote, plus a short summary.
struct StageIO {
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<std::string> warnings;
};

std::vector<PaperRecord> read_papers(const fs::path& path);
std::string papers_jsonl(std::span<const PaperRecord> papers);

/// Pool lines are either full paper records carrying a label, or
/// {"paper_id","label"} assignments looked up in `corpus`.
LabeledPool read_pool(const fs::path& path, const Corpus* corpus);

/// Evidence lines (figctx form, optionally with verdict fields). With
/// `selected_only`, lines whose "selected" is false are skipped.
std::vector<figctx::FigureEvidence> read_evidence(const fs::path& path, bool selected_only = false);

/// Document manifest: {"paper_id": "file.txt", ...} or a list of
/// {"paper_id", "file"} objects; files resolve against the manifest's folder.
std::vector<std::pair<std::string, fs::path>> read_document_manifest(const fs::path& path);

StageIO ingest(const fs::path& raw, std::span<const std::string> keywords, int reference_year,
               const fs::path& papers_out, const fs::path& candidates_out, const fs::path& report_out);

/// Writes `out` (ModelVis papers), `<out>.log.jsonl` and `<out>.retry.json`.
StageIO screen(const fs::path& candidates, const fs::path& pool, const fs::path* pool_corpus,
               const stage1::Options& options, std::span<llm::Gateway* const> gateways, const fs::path& out);

/// Evidence for every document in the manifest (restricted to `papers` when
/// given). Writes `out` and `<out>.log.jsonl`.
StageIO evidence(const fs::path& documents, const fs::path* papers, const fs::path& out);

/// Writes `out` (evidence merged with verdicts) and `<out>.retry.json`.
StageIO detect(const fs::path& papers, const fs::path& evidence_file, const fs::path& library,
               const stage3::LabelVocabulary& vocab, const stage2::Options& options, llm::Gateway& gateway,
               const fs::path& out);

/// Writes `out` (aggregated labels), `<out>.figures.jsonl` and `<out>.retry.json`.
StageIO extract(const fs::path& figures, const fs::path& library, const stage3::LabelVocabulary& vocab,
                const stage3::Options& options, llm::Gateway& gateway, const fs::path& out);

/// Writes sankey.json, trends.csv, weights.csv and paths.jsonl into `out_dir`.
StageIO analyze(const fs::path& labels, const fs::path& papers, const stage3::LabelVocabulary& vocab,
                int reference_year, const fs::path& out_dir);

/// Leave-one-out evaluation. `pool` or `library` may be empty to skip the
/// stages that need them.
StageIO evaluate(const fs::path& pool, const fs::path* pool_corpus, const fs::path& library,
                 const stage3::LabelVocabulary& vocab, const eval::LooConfig& config,
                 std::span<llm::Gateway* const> gateways, const fs::path& out);

struct StageRecord {
    std::string stage;
    std::string started;
    std::string finished;
    StageIO io;
    std::string error;
};

struct RunManifest {
    std::string config_hash;
    std::vector<StageRecord> stages;
    nlohmann::json cache = nlohmann::json::object();

    nlohmann::json to_json() const;
};

/// Runs the requested stages in pipeline order under `config.out_dir`,
/// rewriting the manifest after every stage. A failing stage is recorded and
/// its error rethrown; earlier outputs stay in place.
RunManifest run_pipeline(const RunConfig& config, std::span<const std::string> stages, GatewaySet& gateways);

/// Files whose current hash differs from the manifest.
std::vector<std::string> verify_manifest(const fs::path& manifest);

}  // namespace litmine::pipeline
