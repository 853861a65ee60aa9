#include "litmine/http_backend.hpp"

#include <cstdlib>
#include <sstream>

#include <httplib.h>

namespace litmine::llm {

using nlohmann::json;

HttpBackendConfig HttpBackendConfig::from_json(std::string id, const json& j) {
    HttpBackendConfig c;
    c.id = std::move(id);
    c.endpoint = j.value("endpoint", std::string{});
    c.model = j.value("model", std::string{});
    c.api_key_env = j.value("api_key_env", std::string{});
    c.temperature = j.value("temperature", 0.0);
    c.timeout = std::chrono::seconds(j.value("timeout_seconds", 60));
    return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw ContractError("endpoint must include a scheme: " + config_.endpoint);
    auto path_start = config_.endpoint.find('/', scheme_end + 3);
    base_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
}

std::string HttpBackend::cache_identity() const {
    std::ostringstream os;
    os << "http:" << config_.id << ':' << config_.model << ":t=" << config_.temperature;
    return os.str();
}

json HttpBackend::request_body(const PromptRequest& request) const {
    return {{"model", config_.model},
            {"temperature", config_.temperature},
            {"messages", json::array({{{"role", "system"}, {"content", request.system}},
                                      {{"role", "user"}, {"content", request.user_message()}}})}};
}

std::string HttpBackend::send(const PromptRequest& request) {
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key) throw AuthError("environment variable " + config_.api_key_env + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    httplib::Client client(base_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);

    auto res = client.Post(path_, headers, request_body(request).dump(), "application/json");
    if (!res) throw TransientError(config_.id + ": " + httplib::to_string(res.error()));
    auto status = res->status;
    if (status == 401 || status == 403) throw AuthError(config_.id + ": HTTP " + std::to_string(status));
    if (status == 408 || status == 429 || status >= 500)
        throw TransientError(config_.id + ": HTTP " + std::to_string(status));
    if (status != 200) throw Error(config_.id + ": HTTP " + std::to_string(status) + ": " + res->body);

    auto body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw Error(config_.id + ": response body is not JSON");
    try {
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw Error(config_.id + ": response has no choices[0].message.content");
    }
}

}  // namespace litmine::llm
