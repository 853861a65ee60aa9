#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "litmine/eval.hpp"
#include "litmine/llm_gateway.hpp"
#include "litmine/stage1.hpp"
#include "litmine/stage2.hpp"
#include "litmine/stage3.hpp"

namespace litmine {

/// One LLM slot. "http" backends read endpoint/model/api_key_env/temperature/
/// timeout_seconds from `settings`; "stub" backends take inline "rules" or a
/// "rules_file".
struct BackendDescriptor {
    std::string id;
    std::string type;
    nlohmann::json settings;
};

struct RunConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this

    std::filesystem::path corpus;     // raw metadata JSONL
    std::filesystem::path pool;       // labelled pool JSONL
    std::filesystem::path documents;  // paper_id -> text file manifest
    std::filesystem::path library;    // coded papers JSONL
    std::filesystem::path vocabulary;
    std::filesystem::path aliases;
    std::filesystem::path out_dir = "out";
    std::filesystem::path cache_dir;  // empty = in-memory cache only

    std::vector<std::string> keywords = {"model", "learning", "analytics", "analysis"};
    int reference_year = 2026;
    std::size_t threads = 1;

    stage1::Options stage1;
    stage2::Options stage2;
    stage3::Options stage3;
    eval::LooConfig eval;
    std::string shots = "0,1:6,2:5,3:10";

    llm::GatewayOptions gateway;
    std::vector<BackendDescriptor> backends;
    std::string figure_backend;  // stages 2 and 3; defaults to the first backend

    nlohmann::json raw;
};

struct ConfigLoad {
    RunConfig config;
    std::vector<std::string> errors;
};

/// Parses a config object. Problems are collected, not thrown, so that every
/// one of them can be reported at once.
ConfigLoad parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ConfigLoad load_config(const std::filesystem::path& path);

/// Shot settings for evaluation: comma-separated entries, "n" for every
/// stage or "s:n" for stage s only. Throws InputError.
void apply_shots(std::string_view spec, eval::LooConfig& config);

/// Every violated constraint of a parsed config: input files that do not
/// exist, k values below 1, unknown backend types, credentials missing from
/// the environment, a reference year before the newest corpus record.
std::vector<std::string> validate_config(const RunConfig& config);

std::filesystem::path resolve(const RunConfig& config, const std::filesystem::path& p);

/// Gateways for all configured backends, sharing one response cache.
struct GatewaySet {
    std::shared_ptr<llm::ResponseCache> cache;
    std::vector<std::unique_ptr<llm::Gateway>> gateways;

    std::vector<llm::Gateway*> all() const;
    /// Throws ContractError for an unknown id; empty id = first gateway.
    llm::Gateway& get(std::string_view id) const;
    nlohmann::json stats() const;
};

GatewaySet make_gateways(const RunConfig& config);

stage3::LabelVocabulary load_vocabulary(const std::filesystem::path& vocabulary, const std::filesystem::path& aliases);

}  // namespace litmine
