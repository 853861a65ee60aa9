#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

#include "litmine/llm_gateway.hpp"

namespace litmine::llm {

struct HttpBackendConfig {
    std::string id;             // slot name ("primary", "secondary")
    std::string endpoint;       // e.g. https://api.example.com/v1/chat/completions
    std::string model;
    std::string api_key_env;    // name of the environment variable holding the key
    double temperature = 0.0;
    std::chrono::seconds timeout{60};

    static HttpBackendConfig from_json(std::string id, const nlohmann::json& j);
};

/// Chat-completion style endpoint: POSTs
///   {"model", "temperature", "messages": [{"role":"system"}, {"role":"user"}]}
/// and returns choices[0].message.content. 401/403 raise AuthError; network
/// errors, 408, 429 and 5xx raise TransientError; other statuses and
/// unexpected bodies raise Error.
class HttpBackend : public Backend {
  public:
    explicit HttpBackend(HttpBackendConfig config);

    std::string id() const override { return config_.id; }
    std::string cache_identity() const override;
    std::string send(const PromptRequest& request) override;

    /// Request body for a prompt (exposed for wire-format tests).
    nlohmann::json request_body(const PromptRequest& request) const;

  private:
    HttpBackendConfig config_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
};

}  // namespace litmine::llm
