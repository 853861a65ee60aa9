#include "litmine/llm_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "litmine/hash.hpp"
#include "litmine/io.hpp"
#include "litmine/text.hpp"

namespace litmine::llm {

using nlohmann::json;

namespace {

constexpr std::string_view kScreeningInstructions =
    R"(You screen visualization research papers. Decide whether the TARGET paper is a model visualization (ModelVis) paper: its visualizations show the internals, behavior, training, or outputs of machine learning models rather than only raw data.
Use the labeled examples as reference. Reply with one JSON object and nothing else:
{"relevant": true|false, "confidence": <number in [0,1]>, "evidence": "<short phrase from the target>"})";

constexpr std::string_view kRelevanceInstructions =
    R"(You inspect figures from model visualization papers. Given a figure caption and the paragraphs that discuss it, decide whether the TARGET figure visualizes a machine learning model (its data, structure, parameters, states, dynamics, or results).
If it is relevant, tag its role: "overview" (system or workflow overview), "performance" (model performance or comparison), or "mechanism" (inner workings of the model); otherwise use null.
Use the labeled examples as reference. Reply with one JSON object and nothing else:
{"relevant": true|false, "confidence": <number in [0,1]>, "evidence": "<short phrase>", "role": "overview"|"performance"|"mechanism"|null})";

constexpr std::string_view kExtractionInstructions =
    R"(You code figures from model visualization papers on four fields, using only these categories.
model_listener (one or more): input data, training configuration, model structure, learnable parameters, transient state, dynamics (time), output results.
data_type (one or more): multi-dimensional quantitative, one-dimensional quantitative, relational, temporal, nominal, other.
visualization_type (exactly one): statistical chart, node-link diagram, parallel coordinates, heatmap, Sankey diagram, other.
visualization_purpose (exactly one): performance evaluation, I/O relationship, distribution, dimensionality reduction, other.
Use the labeled examples as reference. Reply with one JSON object and nothing else:
{"model_listener": {"values": [...], "confidence": <0-1>, "evidence": "..."},
 "data_type": {"values": [...], "confidence": <0-1>, "evidence": "..."},
 "visualization_type": {"value": "...", "confidence": <0-1>, "evidence": "..."},
 "visualization_purpose": {"value": "...", "confidence": <0-1>, "evidence": "..."}})";

}  // namespace

std::string_view system_instructions(std::string_view schema_id) {
    if (schema_id == kScreeningSchema) return kScreeningInstructions;
    if (schema_id == kRelevanceSchema) return kRelevanceInstructions;
    if (schema_id == kExtractionSchema) return kExtractionInstructions;
    throw ContractError("unknown response schema '" + std::string(schema_id) + "'");
}

PromptRequest PromptRequest::make(std::string_view schema_id, std::vector<Exemplar> exemplars,
                                  std::string target_id, std::string target) {
    PromptRequest r;
    r.schema_id = std::string(schema_id);
    r.system = std::string(system_instructions(schema_id));
    r.exemplars = std::move(exemplars);
    r.target_id = std::move(target_id);
    r.target = std::move(target);
    return r;
}

std::string PromptRequest::user_message() const {
    std::string out;
    if (exemplars.empty()) {
        out += "No labeled examples are available.\n\n";
    } else {
        out += "Labeled examples:\n\n";
        for (std::size_t i = 0; i < exemplars.size(); ++i) {
            out += "### Example " + std::to_string(i + 1) + "\n";
            out += exemplars[i].evidence;
            out += "\nAnswer: " + exemplars[i].label.dump() + "\n\n";
        }
    }
    out += "### TARGET\n";
    out += target;
    out += "\nAnswer:";
    return out;
}

std::string PromptRequest::content_hash() const {
    return sha256_hex(schema_id + '\0' + system + '\0' + user_message());
}

std::string_view to_string(Role role) {
    switch (role) {
        case Role::overview: return "overview";
        case Role::performance: return "performance";
        case Role::mechanism: break;
    }
    return "mechanism";
}

std::optional<Role> parse_role(std::string_view s) {
    auto v = text::squash(s);
    if (v == "overview") return Role::overview;
    if (v == "performance") return Role::performance;
    if (v == "mechanism") return Role::mechanism;
    return std::nullopt;
}

double clip_confidence(double value) {
    if (std::isnan(value)) return 0.0;
    return std::clamp(value, 0.0, 1.0);
}

std::optional<json> extract_json_object(std::string_view raw) {
    auto first = raw.find('{');
    while (first != std::string_view::npos) {
        // Try the widest span first, then shrink toward the first '{'.
        for (auto last = raw.rfind('}'); last != std::string_view::npos && last > first;
             last = last == 0 ? std::string_view::npos : raw.rfind('}', last - 1)) {
            auto parsed = json::parse(raw.substr(first, last - first + 1), nullptr, false);
            if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        }
        first = raw.find('{', first + 1);
    }
    return std::nullopt;
}

namespace {

std::optional<bool> as_decision(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) {
        auto n = v.get<long long>();
        if (n == 0 || n == 1) return n == 1;
    }
    if (v.is_string()) {
        auto s = text::squash(v.get<std::string>());
        if (s == "true" || s == "yes" || s == "positive") return true;
        if (s == "false" || s == "no" || s == "negative") return false;
    }
    return std::nullopt;
}

}  // namespace

ModelVerdict parse_verdict(std::string_view raw, std::string backend) {
    ModelVerdict v;
    v.backend = std::move(backend);
    auto malformed = [&] {
        v.positive = false;
        v.confidence = 0.0;
        v.evidence = std::string(kMalformedEvidence);
        v.role.reset();
        v.malformed = true;
        return v;
    };
    auto obj = extract_json_object(raw);
    if (!obj) return malformed();
    auto it = obj->find("relevant");
    if (it == obj->end()) return malformed();
    auto decision = as_decision(*it);
    if (!decision) return malformed();
    v.positive = *decision;
    if (auto c = obj->find("confidence"); c != obj->end() && c->is_number())
        v.confidence = clip_confidence(c->get<double>());
    if (auto e = obj->find("evidence"); e != obj->end() && e->is_string())
        v.evidence = text::truncate_utf8(e->get<std::string>(), kEvidenceCap);
    if (auto r = obj->find("role"); r != obj->end() && r->is_string()) v.role = parse_role(r->get<std::string>());
    return v;
}

bool consensus(std::span<const ModelVerdict> verdicts) {
    if (verdicts.empty()) throw ContractError("consensus: no verdicts");
    return std::all_of(verdicts.begin(), verdicts.end(), [](const ModelVerdict& v) { return v.positive; });
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(std::string_view backend_identity, const PromptRequest& request) {
    return sha256_hex(std::string(backend_identity) + '\0' + request.content_hash());
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
    {
        std::shared_lock lock(mu_);
        if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    if (dir_.empty()) return std::nullopt;
    auto path = path_for(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    std::string response;
    try {
        response = io::read_json(path).at("response").get<std::string>();
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable entries count as misses
    }
    std::unique_lock lock(mu_);
    entries_.emplace(key, response);
    return response;
}

void ResponseCache::put(const std::string& key, const std::string& backend, const std::string& response) {
    std::unique_lock lock(mu_);
    entries_[key] = response;
    if (dir_.empty()) return;
    json entry = {{"key", key}, {"backend", backend}, {"response", response}};
    io::write_atomic(path_for(key), entry.dump(2) + "\n");
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

json GatewayStats::to_json() const {
    return {{"requests", requests}, {"cache_hits", cache_hits}, {"network_calls", network_calls},
            {"retries", retries}, {"failures", failures}};
}

Gateway::Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache, GatewayOptions options)
    : backend_(std::move(backend)), cache_(std::move(cache)), options_(std::move(options)) {
    if (!backend_) throw ContractError("gateway: null backend");
    if (!cache_) cache_ = std::make_shared<ResponseCache>();
    if (options_.max_attempts < 1) options_.max_attempts = 1;
    if (options_.max_concurrency < 1) options_.max_concurrency = 1;
    if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    id_ = backend_->id();
    identity_ = backend_->cache_identity();
}

void Gateway::note(std::string line) {
    std::lock_guard lock(mu_);
    log_.push_back(std::move(line));
}

void Gateway::acquire_slot() {
    std::unique_lock lock(mu_);
    slots_cv_.wait(lock, [&] { return in_flight_ < options_.max_concurrency; });
    ++in_flight_;
}

void Gateway::release_slot() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    slots_cv_.notify_one();
}

void Gateway::throttle() {
    if (options_.requests_per_second <= 0.0) return;
    auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / options_.requests_per_second));
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mu_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_send_);
        next_send_ = slot + interval;
    }
    std::this_thread::sleep_until(slot);
}

std::string Gateway::complete(const PromptRequest& request) {
    auto key = ResponseCache::key(identity_, request);
    auto request_id = key.substr(0, 12);
    {
        std::lock_guard lock(mu_);
        ++stats_.requests;
    }
    if (auto hit = cache_->get(key)) {
        std::lock_guard lock(mu_);
        ++stats_.cache_hits;
        return *hit;
    }

    acquire_slot();
    struct SlotGuard {
        Gateway* g;
        ~SlotGuard() { g->release_slot(); }
    } guard{this};

    std::string last_error;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        if (attempt > 1) {
            auto delay = options_.base_backoff * (1LL << std::min(attempt - 2, 16));
            options_.sleep(std::min<std::chrono::milliseconds>(delay, options_.max_backoff));
        }
        throttle();
        {
            std::lock_guard lock(mu_);
            ++stats_.network_calls;
            if (attempt > 1) ++stats_.retries;
        }
        try {
            auto response = backend_->send(request);
            if (attempt > 1)
                note(id_ + " request " + request_id + ": succeeded after " + std::to_string(attempt - 1) +
                     " retries");
            cache_->put(key, id_, response);
            return response;
        } catch (const TransientError& e) {
            last_error = e.what();
            note(id_ + " request " + request_id + ": attempt " + std::to_string(attempt) + " failed: " + last_error);
        } catch (const AuthError& e) {
            {
                std::lock_guard lock(mu_);
                ++stats_.failures;
            }
            note(id_ + " request " + request_id + ": authentication failed: " + e.what());
            throw BackendUnavailable(request_id, id_ + ": authentication failed: " + e.what(), true);
        } catch (const std::exception& e) {
            {
                std::lock_guard lock(mu_);
                ++stats_.failures;
            }
            note(id_ + " request " + request_id + ": permanent failure: " + e.what());
            throw BackendUnavailable(request_id, id_ + ": " + e.what());
        }
    }
    {
        std::lock_guard lock(mu_);
        ++stats_.failures;
    }
    note(id_ + " request " + request_id + ": giving up after " + std::to_string(options_.max_attempts) + " attempts");
    throw BackendUnavailable(request_id, id_ + ": unavailable after " + std::to_string(options_.max_attempts) +
                                             " attempts: " + last_error);
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

std::vector<std::string> Gateway::log() const {
    std::lock_guard lock(mu_);
    return log_;
}

}  // namespace litmine::llm
