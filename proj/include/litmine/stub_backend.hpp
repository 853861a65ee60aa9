#pragma once

#include <atomic>
#include <functional>
#include <string>

#include <json.hpp>

#include "litmine/llm_gateway.hpp"

namespace litmine::llm {

/// Deterministic offline backend.
///
/// Either wraps a function, or is driven by a JSON rule set matched against
/// the target text (case-insensitive substring):
///
///     {"id": "primary",
///      "fail_if_any": ["..."],            // transient failure, every attempt
///      "malformed_if_any": ["..."],       // reply that is not JSON
///      "screening":  {"rules": [{"if_any": ["saliency"], "relevant": true,
///                                "confidence": 0.9}],
///                     "default": {"relevant": false, "confidence": 0.5}},
///      "relevance":  {"rules": [{"if_any": ["accuracy"], "relevant": true,
///                                "confidence": 0.8, "role": "performance"}],
///                     "default": {...}},
///      "extraction": {"rules": [{"if_any": ["loss"], "payload": {...}}],
///                     "default": "echo_nearest" | {...payload...}}}
///
/// First matching rule wins. "echo_nearest" replies with the label of the
/// first (highest-ranked) exemplar, or "{}" when there are none.
class StubBackend : public Backend {
  public:
    using Responder = std::function<std::string(const PromptRequest&)>;

    StubBackend(std::string id, Responder responder);
    explicit StubBackend(const nlohmann::json& rules);

    std::string id() const override { return id_; }
    std::string cache_identity() const override;
    std::string send(const PromptRequest& request) override;

    std::size_t calls() const { return calls_.load(); }

  private:
    std::string respond_from_rules(const PromptRequest& request) const;

    std::string id_;
    Responder responder_;
    nlohmann::json rules_;
    std::atomic<std::size_t> calls_{0};
};

/// Stub that answers positive iff the target contains `keyword`.
std::shared_ptr<StubBackend> keyword_stub(std::string id, std::string keyword, double confidence = 0.9);

}  // namespace litmine::llm
