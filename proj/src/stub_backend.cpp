#include "litmine/stub_backend.hpp"

#include "litmine/hash.hpp"
#include "litmine/text.hpp"

namespace litmine::llm {

using nlohmann::json;

namespace {

bool matches_any(const json& words, std::string_view target_lower) {
    if (!words.is_array()) return false;
    for (const auto& w : words)
        if (target_lower.find(text::to_lower(w.get<std::string>())) != std::string_view::npos) return true;
    return false;
}

std::string first_match(const json& words, std::string_view target_lower) {
    for (const auto& w : words) {
        auto k = text::to_lower(w.get<std::string>());
        if (target_lower.find(k) != std::string_view::npos) return k;
    }
    return {};
}

json verdict_reply(const json& rule, std::string evidence) {
    json out = {{"relevant", rule.value("relevant", false)},
                {"confidence", rule.value("confidence", 0.5)},
                {"evidence", std::move(evidence)}};
    if (rule.contains("role")) out["role"] = rule["role"];
    return out;
}

}  // namespace

StubBackend::StubBackend(std::string id, Responder responder)
    : id_(std::move(id)), responder_(std::move(responder)) {
    if (!responder_) throw ContractError("stub backend without responder");
}

StubBackend::StubBackend(const json& rules) : id_(rules.value("id", std::string("stub"))), rules_(rules) {}

std::string StubBackend::cache_identity() const {
    if (responder_) return "stub:" + id_;
    return "stub:" + id_ + ":" + sha256_hex(rules_.dump()).substr(0, 16);
}

std::string StubBackend::send(const PromptRequest& request) {
    ++calls_;
    if (responder_) return responder_(request);
    return respond_from_rules(request);
}

std::string StubBackend::respond_from_rules(const PromptRequest& request) const {
    auto target = text::to_lower(request.target);
    if (matches_any(rules_.value("fail_if_any", json::array()), target))
        throw TransientError(id_ + ": injected failure");
    if (matches_any(rules_.value("malformed_if_any", json::array()), target)) return "maybe?";

    const char* section = request.schema_id == kScreeningSchema   ? "screening"
                          : request.schema_id == kRelevanceSchema ? "relevance"
                                                                  : "extraction";
    auto stage = rules_.value(section, json::object());
    for (const auto& rule : stage.value("rules", json::array())) {
        auto words = rule.value("if_any", json::array());
        if (!matches_any(words, target)) continue;
        if (request.schema_id == kExtractionSchema) return rule.value("payload", json::object()).dump();
        return verdict_reply(rule, first_match(words, target)).dump();
    }
    auto fallback = stage.value("default", json());
    if (request.schema_id == kExtractionSchema) {
        if (fallback.is_object()) return fallback.dump();
        // echo_nearest
        return request.exemplars.empty() ? "{}" : request.exemplars.front().label.dump();
    }
    if (!fallback.is_object()) fallback = {{"relevant", false}, {"confidence", 0.5}};
    return verdict_reply(fallback, "none").dump();
}

std::shared_ptr<StubBackend> keyword_stub(std::string id, std::string keyword, double confidence) {
    return std::make_shared<StubBackend>(std::move(id), [keyword = text::to_lower(keyword), confidence](const PromptRequest& r) {
        bool hit = text::to_lower(r.target).find(keyword) != std::string::npos;
        return json{{"relevant", hit}, {"confidence", confidence}, {"evidence", hit ? keyword : "none"}}.dump();
    });
}

}  // namespace litmine::llm
