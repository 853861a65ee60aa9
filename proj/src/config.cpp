#include "litmine/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "litmine/corpus.hpp"
#include "litmine/error.hpp"
#include "litmine/http_backend.hpp"
#include "litmine/io.hpp"
#include "litmine/stub_backend.hpp"
#include "litmine/text.hpp"

namespace litmine {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads typed members of one config section, collecting type errors.
class Section {
  public:
    Section(const json& j, std::string name, std::vector<std::string>& errors)
        : j_(j), name_(std::move(name)), errors_(errors) {
        if (!j_.is_object()) {
            errors_.push_back(name_ + ": expected an object");
            return;
        }
    }

    void mark(const std::string& key) { seen_.insert(key); }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key)) return;
        try {
            const auto& v = j_.at(key);
            if constexpr (std::is_same_v<T, std::size_t>) {
                if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("");
                out = v.get<std::size_t>();
            } else if constexpr (std::is_same_v<T, int>) {
                if (!v.is_number_integer()) throw std::invalid_argument("");
                out = v.get<int>();
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw std::invalid_argument("");
                out = v.get<double>();
            } else if constexpr (std::is_same_v<T, fs::path>) {
                if (!v.is_string()) throw std::invalid_argument("");
                out = v.get<std::string>();
            } else {
                out = v.get<T>();
            }
        } catch (const std::exception&) {
            errors_.push_back(name_ + "." + key + ": wrong type");
        }
    }

    void finish() {
        if (!j_.is_object()) return;
        for (const auto& [key, _] : j_.items())
            if (!seen_.contains(key)) errors_.push_back(name_ + ": unknown key '" + key + "'");
    }

  private:
    const json& j_;
    std::string name_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

const json kEmpty = json::object();

const json& sub(const json& j, const char* key) { return j.contains(key) ? j.at(key) : kEmpty; }

}  // namespace

ConfigLoad parse_config(const json& j, const fs::path& base_dir) {
    ConfigLoad out;
    auto& c = out.config;
    auto& errors = out.errors;
    c.base_dir = base_dir;
    c.raw = j;
    if (!j.is_object()) {
        errors.push_back("config: expected a JSON object");
        return out;
    }

    Section top(j, "config", errors);
    top.read("reference_year", c.reference_year);
    top.read("threads", c.threads);
    top.read("keywords", c.keywords);
    top.read("figure_backend", c.figure_backend);
    for (const char* s : {"paths", "stage1", "stage2", "stage3", "eval", "gateway", "backends"}) top.mark(s);
    top.finish();

    Section paths(sub(j, "paths"), "paths", errors);
    paths.read("corpus", c.corpus);
    paths.read("pool", c.pool);
    paths.read("documents", c.documents);
    paths.read("library", c.library);
    paths.read("vocabulary", c.vocabulary);
    paths.read("aliases", c.aliases);
    paths.read("out_dir", c.out_dir);
    paths.read("cache_dir", c.cache_dir);
    paths.finish();

    Section s1(sub(j, "stage1"), "stage1", errors);
    s1.read("k", c.stage1.k);
    s1.read("min_pos", c.stage1.min_pos);
    s1.read("min_neg", c.stage1.min_neg);
    s1.finish();

    Section s2(sub(j, "stage2"), "stage2", errors);
    s2.read("k", c.stage2.k);
    s2.read("max_figures", c.stage2.max_figures);
    s2.read("per_neighbor_positive", c.stage2.per_neighbor_positive);
    s2.read("per_neighbor_negative", c.stage2.per_neighbor_negative);
    s2.read("max_exemplars", c.stage2.max_exemplars);
    s2.finish();

    Section s3(sub(j, "stage3"), "stage3", errors);
    s3.read("k", c.stage3.k);
    s3.read("per_paper_cap", c.stage3.per_paper_cap);
    s3.read("caption_repeats", c.stage3.caption_repeats);
    s3.finish();

    std::vector<int> eval_stages = {1, 2, 3};
    Section ev(sub(j, "eval"), "eval", errors);
    ev.read("stages", eval_stages);
    ev.read("shots", c.shots);
    ev.read("baseline_k", c.eval.baseline_k);
    ev.finish();
    c.eval.stages = {eval_stages.begin(), eval_stages.end()};
    for (int s : c.eval.stages)
        if (s < 1 || s > 3) errors.push_back("eval.stages: unknown stage " + std::to_string(s));
    try {
        apply_shots(c.shots, c.eval);
    } catch (const Error& e) {
        errors.push_back(std::string("eval.shots: ") + e.what());
    }

    std::size_t base_backoff_ms = 250, max_backoff_ms = 4000;
    int attempts = c.gateway.max_attempts;
    Section gw(sub(j, "gateway"), "gateway", errors);
    gw.read("max_attempts", attempts);
    gw.read("base_backoff_ms", base_backoff_ms);
    gw.read("max_backoff_ms", max_backoff_ms);
    gw.read("max_concurrency", c.gateway.max_concurrency);
    gw.read("requests_per_second", c.gateway.requests_per_second);
    gw.finish();
    c.gateway.max_attempts = attempts;
    c.gateway.base_backoff = std::chrono::milliseconds(base_backoff_ms);
    c.gateway.max_backoff = std::chrono::milliseconds(max_backoff_ms);
    if (attempts < 1) errors.push_back("gateway.max_attempts must be >= 1");
    if (c.gateway.max_concurrency < 1) errors.push_back("gateway.max_concurrency must be >= 1");

    const auto& backends = sub(j, "backends");
    if (j.contains("backends") && !backends.is_array()) {
        errors.push_back("backends: expected an array");
    } else if (backends.is_array()) {
        for (std::size_t i = 0; i < backends.size(); ++i) {
            const auto& b = backends[i];
            auto where = "backends[" + std::to_string(i) + "]";
            if (!b.is_object() || !b.contains("id") || !b["id"].is_string() || !b.contains("type") ||
                !b["type"].is_string()) {
                errors.push_back(where + ": needs string \"id\" and \"type\"");
                continue;
            }
            BackendDescriptor d{b["id"].get<std::string>(), b["type"].get<std::string>(), b};
            for (const auto& prev : c.backends)
                if (prev.id == d.id) errors.push_back(where + ": duplicate backend id '" + d.id + "'");
            c.backends.push_back(std::move(d));
        }
    }

    c.stage1.threads = c.stage2.threads = c.stage3.threads = c.eval.threads = c.threads;
    c.eval.stage1 = c.stage1;
    c.eval.stage2 = c.stage2;
    c.eval.stage3 = c.stage3;
    return out;
}

ConfigLoad load_config(const fs::path& path) {
    json j;
    try {
        j = io::read_json(path);
    } catch (const Error& e) {
        ConfigLoad out;
        out.errors.push_back(e.what());
        return out;
    }
    return parse_config(j, path.parent_path());
}

void apply_shots(std::string_view spec, eval::LooConfig& config) {
    std::array<std::vector<std::size_t>, 3> shots;
    for (const auto& raw : text::split(spec, ',')) {
        std::string entry(text::trim(raw));
        if (entry.empty()) continue;
        std::optional<int> stage;
        std::string count = entry;
        if (auto colon = entry.find(':'); colon != std::string::npos) {
            auto s = entry.substr(0, colon);
            if (s != "1" && s != "2" && s != "3") throw InputError("bad stage in shot entry '" + entry + "'");
            stage = s[0] - '0';
            count = entry.substr(colon + 1);
        }
        if (count.empty() || count.find_first_not_of("0123456789") != std::string::npos)
            throw InputError("bad shot count in '" + entry + "'");
        auto n = static_cast<std::size_t>(std::stoul(count));
        for (int s = 1; s <= 3; ++s) {
            if (stage && *stage != s) continue;
            auto& v = shots[s - 1];
            if (std::find(v.begin(), v.end(), n) == v.end()) v.push_back(n);
        }
    }
    for (auto& v : shots) {
        if (v.empty()) throw InputError("shot list leaves a stage without settings");
        std::sort(v.begin(), v.end());
    }
    config.stage1_shots = shots[0];
    config.stage2_shots = shots[1];
    config.stage3_shots = shots[2];
}

fs::path resolve(const RunConfig& config, const fs::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return config.base_dir / p;
}

std::vector<std::string> validate_config(const RunConfig& c) {
    std::vector<std::string> errors;
    auto need_file = [&](const char* name, const fs::path& p) {
        if (p.empty()) return;
        if (!fs::is_regular_file(resolve(c, p)))
            errors.push_back(std::string("paths.") + name + ": file not found: " + resolve(c, p).string());
    };
    need_file("corpus", c.corpus);
    need_file("pool", c.pool);
    need_file("documents", c.documents);
    need_file("library", c.library);
    need_file("vocabulary", c.vocabulary);
    need_file("aliases", c.aliases);

    auto need_k = [&](const char* name, std::size_t k) {
        if (k < 1) errors.push_back(std::string(name) + ": k must be >= 1");
    };
    need_k("stage1", c.stage1.k);
    need_k("stage2", c.stage2.k);
    need_k("stage2.max_figures", c.stage2.max_figures);
    need_k("stage3", c.stage3.k);
    need_k("stage3.per_paper_cap", c.stage3.per_paper_cap);
    need_k("stage3.caption_repeats", c.stage3.caption_repeats);
    need_k("eval.baseline_k", c.eval.baseline_k);
    need_k("threads", c.threads);
    if (c.stage1.min_pos + c.stage1.min_neg > c.stage1.k)
        errors.push_back("stage1: min_pos + min_neg exceeds k");
    if (c.keywords.empty()) errors.push_back("keywords: at least one keyword is required");

    for (const auto& b : c.backends) {
        auto where = "backend '" + b.id + "'";
        if (b.type == "http") {
            for (const char* key : {"api_key", "key", "token"})
                if (b.settings.contains(key))
                    errors.push_back(where + ": credentials must come from the environment (use api_key_env)");
            for (const char* key : {"endpoint", "model", "api_key_env"})
                if (!b.settings.contains(key) || !b.settings[key].is_string() ||
                    b.settings[key].get<std::string>().empty())
                    errors.push_back(where + ": missing \"" + key + "\"");
            if (b.settings.contains("api_key_env") && b.settings["api_key_env"].is_string()) {
                auto var = b.settings["api_key_env"].get<std::string>();
                if (!var.empty() && !std::getenv(var.c_str()))
                    errors.push_back(where + ": environment variable " + var + " is not set");
            }
        } else if (b.type == "stub") {
            if (b.settings.contains("rules_file")) {
                if (!b.settings["rules_file"].is_string())
                    errors.push_back(where + ": rules_file must be a string");
                else
                    need_file("rules_file", b.settings["rules_file"].get<std::string>());
            } else if (!b.settings.contains("rules")) {
                errors.push_back(where + ": stub backend needs \"rules\" or \"rules_file\"");
            }
        } else {
            errors.push_back(where + ": unknown backend type '" + b.type + "'");
        }
    }
    if (!c.figure_backend.empty() &&
        std::none_of(c.backends.begin(), c.backends.end(), [&](const auto& b) { return b.id == c.figure_backend; }))
        errors.push_back("figure_backend: no backend named '" + c.figure_backend + "'");

    if (!c.corpus.empty() && fs::is_regular_file(resolve(c, c.corpus))) {
        try {
            int newest = 0;
            for (const auto& rec : io::read_jsonl(resolve(c, c.corpus)))
                if (rec.is_object() && rec.contains("year") && rec["year"].is_number_integer())
                    newest = std::max(newest, rec["year"].get<int>());
            if (newest > c.reference_year)
                errors.push_back("reference_year " + std::to_string(c.reference_year) +
                                 " is before the newest corpus year " + std::to_string(newest));
        } catch (const Error& e) {
            errors.push_back(std::string("paths.corpus: ") + e.what());
        }
    }
    return errors;
}

std::vector<llm::Gateway*> GatewaySet::all() const {
    std::vector<llm::Gateway*> out;
    for (const auto& g : gateways) out.push_back(g.get());
    return out;
}

llm::Gateway& GatewaySet::get(std::string_view id) const {
    if (gateways.empty()) throw ContractError("no backends configured");
    if (id.empty()) return *gateways.front();
    for (const auto& g : gateways)
        if (g->id() == id) return *g;
    throw ContractError("no backend named '" + std::string(id) + "'");
}

json GatewaySet::stats() const {
    json out = json::object();
    for (const auto& g : gateways) out[g->id()] = g->stats().to_json();
    return out;
}

GatewaySet make_gateways(const RunConfig& config) {
    GatewaySet set;
    set.cache = std::make_shared<llm::ResponseCache>(resolve(config, config.cache_dir));
    for (const auto& b : config.backends) {
        std::shared_ptr<llm::Backend> backend;
        if (b.type == "http") {
            backend = std::make_shared<llm::HttpBackend>(llm::HttpBackendConfig::from_json(b.id, b.settings));
        } else if (b.type == "stub") {
            json rules = b.settings.contains("rules_file")
                             ? io::read_json(resolve(config, b.settings["rules_file"].get<std::string>()))
                             : b.settings.at("rules");
            rules["id"] = b.id;
            backend = std::make_shared<llm::StubBackend>(rules);
        } else {
            throw InputError("unknown backend type '" + b.type + "'");
        }
        set.gateways.push_back(std::make_unique<llm::Gateway>(backend, set.cache, config.gateway));
    }
    return set;
}

stage3::LabelVocabulary load_vocabulary(const fs::path& vocabulary, const fs::path& aliases) {
    if (vocabulary.empty() && aliases.empty()) return stage3::LabelVocabulary::with_default_aliases();
    json categories;
    if (vocabulary.empty()) {
        auto standard = stage3::LabelVocabulary::standard();
        for (auto f : stage3::kFields) categories[std::string(stage3::field_name(f))] = standard.categories(f);
    } else {
        categories = io::read_json(vocabulary);
    }
    json alias_map = aliases.empty() ? stage3::LabelVocabulary::default_aliases() : io::read_json(aliases);
    return stage3::LabelVocabulary::from_json(categories, alias_map);
}

}  // namespace litmine
