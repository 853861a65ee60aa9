#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "litmine/error.hpp"

namespace litmine::llm {

/// Response schemas, one per pipeline stage. The suffix versions the prompt template.
inline constexpr std::string_view kScreeningSchema = "screening.v1";
inline constexpr std::string_view kRelevanceSchema = "relevance.v1";
inline constexpr std::string_view kExtractionSchema = "extraction.v1";

/// System instructions for a schema id; throws ContractError if unknown.
std::string_view system_instructions(std::string_view schema_id);

struct Exemplar {
    std::string source_id;  // paper or figure id, recorded for leakage audits
    std::string evidence;
    nlohmann::json label;
};

struct PromptRequest {
    std::string schema_id;
    std::string system;
    std::vector<Exemplar> exemplars;
    std::string target_id;
    std::string target;

    /// Builds a request with the schema's standard system instructions.
    static PromptRequest make(std::string_view schema_id, std::vector<Exemplar> exemplars,
                              std::string target_id, std::string target);

    /// The user message: numbered exemplars with their answers, then the target.
    std::string user_message() const;
    /// SHA-256 over schema, system text and user message.
    std::string content_hash() const;
};

enum class Role { overview, performance, mechanism };
std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view s);

struct ModelVerdict {
    std::string backend;
    bool positive = false;
    double confidence = 0.0;  // always within [0, 1]
    std::string evidence;
    std::optional<Role> role;  // suggested by the model; relevance schema only
    bool malformed = false;

    bool operator==(const ModelVerdict&) const = default;
};

inline constexpr std::size_t kEvidenceCap = 240;
inline constexpr std::string_view kMalformedEvidence = "(malformed)";

double clip_confidence(double value);

/// Locate and parse the first JSON object in a model reply (tolerates code
/// fences and surrounding prose). Returns nullopt if there is none.
std::optional<nlohmann::json> extract_json_object(std::string_view raw);

/// Total: unparseable replies become a negative verdict at confidence 0 with
/// evidence "(malformed)".
ModelVerdict parse_verdict(std::string_view raw, std::string backend = {});

/// Positive iff every verdict is positive. Throws ContractError when empty.
bool consensus(std::span<const ModelVerdict> verdicts);

/// Retryable failure (timeout, 429, 5xx, connection reset).
class TransientError : public Error {
  public:
    using Error::Error;
};

/// Credentials rejected; never retried.
class AuthError : public Error {
  public:
    using Error::Error;
};

/// Raised when a request could not be completed; carries the request id.
class BackendUnavailable : public Error {
  public:
    BackendUnavailable(std::string request_id, const std::string& what, bool auth_failure = false)
        : Error(what), request_id_(std::move(request_id)), auth_failure_(auth_failure) {}
    const std::string& request_id() const { return request_id_; }
    bool auth_failure() const { return auth_failure_; }

  private:
    std::string request_id_;
    bool auth_failure_ = false;
};

class Backend {
  public:
    virtual ~Backend() = default;
    /// Slot name, e.g. "primary".
    virtual std::string id() const = 0;
    /// Everything that changes the reply for a fixed prompt (model, decoding).
    virtual std::string cache_identity() const { return id(); }
    /// Raw reply text. Throws TransientError or AuthError.
    virtual std::string send(const PromptRequest& request) = 0;
};

/// Request-hash -> raw response. Entries are kept in memory and, when a
/// directory is given, mirrored to `<dir>/<key[0:2]>/<key>.json`.
/// Thread-safe.
class ResponseCache {
  public:
    explicit ResponseCache(std::filesystem::path dir = {});

    static std::string key(std::string_view backend_identity, const PromptRequest& request);

    std::optional<std::string> get(const std::string& key);
    void put(const std::string& key, const std::string& backend, const std::string& response);
    std::size_t size() const;

  private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path dir_;
    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, std::string> entries_;
};

struct GatewayOptions {
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{250};
    std::chrono::milliseconds max_backoff{4000};
    std::size_t max_concurrency = 4;
    double requests_per_second = 0.0;  // 0 = unlimited
    /// Replaced in tests to avoid real sleeps.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayStats {
    std::size_t requests = 0;
    std::size_t cache_hits = 0;
    std::size_t network_calls = 0;
    std::size_t retries = 0;
    std::size_t failures = 0;

    nlohmann::json to_json() const;
};

/// One backend behind a cache, retry policy, concurrency cap and rate limiter.
class Gateway {
  public:
    Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache = nullptr,
            GatewayOptions options = {});

    const std::string& id() const { return id_; }

    /// Raw reply for the request, served from cache when possible. Transient
    /// failures are retried with exponential backoff up to max_attempts;
    /// exhaustion and auth failures raise BackendUnavailable.
    std::string complete(const PromptRequest& request);

    GatewayStats stats() const;
    std::vector<std::string> log() const;

  private:
    void acquire_slot();
    void release_slot();
    void throttle();
    void note(std::string line);

    std::shared_ptr<Backend> backend_;
    std::shared_ptr<ResponseCache> cache_;
    GatewayOptions options_;
    std::string id_;
    std::string identity_;

    mutable std::mutex mu_;
    std::condition_variable slots_cv_;
    std::size_t in_flight_ = 0;
    std::chrono::steady_clock::time_point next_send_{};
    GatewayStats stats_;
    std::vector<std::string> log_;
};

}  // namespace litmine::llm
