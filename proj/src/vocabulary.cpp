#include "litmine/vocabulary.hpp"

#include <algorithm>
#include <map>

#include "builtin_data.hpp"
#include "litmine/error.hpp"
#include "litmine/figctx.hpp"
#include "litmine/llm_gateway.hpp"
#include "litmine/text.hpp"

namespace litmine::stage3 {

using nlohmann::json;

std::string_view field_name(Field field) {
    switch (field) {
        case Field::model_listener: return "model_listener";
        case Field::data_type: return "data_type";
        case Field::visualization_type: return "visualization_type";
        case Field::visualization_purpose: break;
    }
    return "visualization_purpose";
}

std::optional<Field> parse_field(std::string_view name) {
    auto n = text::squash(name);
    for (auto f : kFields)
        if (n == field_name(f) || n == text::squash(field_name(f))) return f;
    return std::nullopt;
}

LabelVocabulary LabelVocabulary::standard() {
    static const json categories = json::parse(builtin::kVocabularyJson);
    return from_json(categories, json::object());
}

const json& LabelVocabulary::default_aliases() {
    static const json aliases = json::parse(builtin::kAliasesJson);
    return aliases;
}

LabelVocabulary LabelVocabulary::with_default_aliases() {
    static const json categories = json::parse(builtin::kVocabularyJson);
    return from_json(categories, default_aliases());
}

LabelVocabulary LabelVocabulary::from_json(const json& categories, const json& aliases) {
    LabelVocabulary v;
    for (auto f : kFields) {
        auto it = categories.find(std::string(field_name(f)));
        if (it == categories.end() || !it->is_array() || it->empty())
            throw InputError("vocabulary: field " + std::string(field_name(f)) + " missing or empty");
        auto& fv = v.at(f);
        for (const auto& c : *it) {
            if (!c.is_string()) throw InputError("vocabulary: categories must be strings");
            auto canonical = std::string(text::trim(c.get<std::string>()));
            if (!fv.by_key.emplace(text::squash(canonical), canonical).second)
                throw InputError("vocabulary: duplicate category " + canonical);
            fv.categories.push_back(canonical);
        }
    }
    if (!aliases.is_null()) {
        if (!aliases.is_object()) throw InputError("alias map must be a JSON object");
        for (const auto& [name, table] : aliases.items()) {
            auto field = parse_field(name);
            if (!field) throw InputError("alias map: unknown field " + name);
            if (!table.is_object()) throw InputError("alias map: " + name + " must map strings to strings");
            for (const auto& [surface, target] : table.items()) v.add_alias(*field, surface, target.get<std::string>());
        }
    }
    return v;
}

const std::vector<std::string>& LabelVocabulary::categories(Field field) const { return at(field).categories; }

bool LabelVocabulary::contains(Field field, std::string_view canonical) const {
    const auto& c = at(field).categories;
    return std::find(c.begin(), c.end(), canonical) != c.end();
}

std::optional<std::string> LabelVocabulary::resolve(Field field, std::string_view surface) const {
    auto key = text::squash(surface);
    const auto& fv = at(field);
    if (auto it = fv.by_key.find(key); it != fv.by_key.end()) return it->second;
    if (auto it = fv.aliases.find(key); it != fv.aliases.end()) return it->second;
    return std::nullopt;
}

void LabelVocabulary::add_alias(Field field, std::string_view surface, std::string_view canonical) {
    auto& fv = at(field);
    auto target = fv.by_key.find(text::squash(canonical));
    if (target == fv.by_key.end())
        throw InputError("alias '" + std::string(surface) + "' targets unknown " + std::string(field_name(field)) +
                         " category '" + std::string(canonical) + "'");
    fv.aliases[text::squash(surface)] = target->second;
}

std::size_t LabelVocabulary::alias_count() const {
    std::size_t n = 0;
    for (const auto& fv : fields_) n += fv.aliases.size();
    return n;
}

bool LabelVocabulary::matches_standard() const {
    auto ref = standard();
    for (auto f : kFields)
        if (categories(f) != ref.categories(f)) return false;
    return true;
}

std::set<std::string> FrameworkLabels::values(Field field) const {
    switch (field) {
        case Field::model_listener: return listeners;
        case Field::data_type: return data_types;
        case Field::visualization_type: return {vis_type};
        case Field::visualization_purpose: break;
    }
    return {vis_purpose};
}

bool FrameworkLabels::same_labels(const FrameworkLabels& o) const {
    return paper_id == o.paper_id && figure_id == o.figure_id && base_figure_id == o.base_figure_id &&
           listeners == o.listeners && data_types == o.data_types && vis_type == o.vis_type &&
           vis_purpose == o.vis_purpose && annotations == o.annotations;
}

json to_payload(const FrameworkLabels& l) {
    json out = json::object();
    for (auto f : kFields) {
        const auto& a = l.annotation(f);
        json entry = {{"confidence", a.confidence}, {"evidence", a.evidence}};
        if (is_multi_label(f))
            entry["values"] = l.values(f);
        else
            entry["value"] = *l.values(f).begin();
        out[std::string(field_name(f))] = std::move(entry);
    }
    return out;
}

json to_json(const FrameworkLabels& l) {
    json out = {{"paper_id", l.paper_id}, {"figure_id", l.figure_id}, {"base_figure_id", l.base_figure_id}};
    out["labels"] = to_payload(l);
    out["flagged"] = l.flagged;
    if (!l.notes.empty()) out["notes"] = l.notes;
    return out;
}

namespace {

const json* field_entry(const json& payload, Field f) {
    static const std::map<Field, std::vector<std::string>> keys = {
        {Field::model_listener, {"model_listener", "listeners", "listener"}},
        {Field::data_type, {"data_type", "data_types"}},
        {Field::visualization_type, {"visualization_type", "vis_type"}},
        {Field::visualization_purpose, {"visualization_purpose", "vis_purpose"}}};
    if (!payload.is_object()) return nullptr;
    for (const auto& k : keys.at(f))
        if (auto it = payload.find(k); it != payload.end() && !it->is_null()) return &*it;
    return nullptr;
}

// Raw surface values: strings from a string, an array, or an object's
// "values"/"value" member.
std::vector<std::string> raw_values(const json* entry) {
    std::vector<std::string> out;
    if (!entry) return out;
    const json* v = entry;
    if (entry->is_object()) {
        v = nullptr;
        for (const char* k : {"values", "value", "labels", "label"})
            if (auto it = entry->find(k); it != entry->end() && !it->is_null()) {
                v = &*it;
                break;
            }
        if (!v) return out;
    }
    if (v->is_string()) out.push_back(v->get<std::string>());
    if (v->is_array())
        for (const auto& x : *v)
            if (x.is_string()) out.push_back(x.get<std::string>());
    return out;
}

FieldAnnotation raw_annotation(const json* entry, std::size_t cap) {
    FieldAnnotation a;
    if (!entry || !entry->is_object()) return a;
    if (auto c = entry->find("confidence"); c != entry->end() && c->is_number())
        a.confidence = llm::clip_confidence(c->get<double>());
    if (auto e = entry->find("evidence"); e != entry->end() && e->is_string())
        a.evidence = text::truncate_utf8(e->get<std::string>(), cap);
    return a;
}

}  // namespace

FrameworkLabels normalize_labels(const json& payload, const LabelVocabulary& vocab, const NormalizeOptions& options) {
    FrameworkLabels out;
    auto note = [&](std::string s) { out.notes.push_back(std::move(s)); };
    for (auto f : kFields) {
        const json* entry = field_entry(payload, f);
        out.annotation(f) = raw_annotation(entry, options.evidence_cap);
        auto name = std::string(field_name(f));
        std::set<std::string> resolved;
        for (const auto& raw : raw_values(entry)) {
            if (auto c = vocab.resolve(f, raw)) {
                resolved.insert(*c);
            } else if (vocab.has_other(f)) {
                resolved.insert(std::string(kOther));
                note(name + ": '" + raw + "' mapped to other");
            } else {
                note(name + ": dropped unknown value '" + raw + "'");
            }
        }
        if (is_multi_label(f)) {
            if (resolved.empty()) {
                if (vocab.has_other(f)) {
                    resolved.insert(std::string(kOther));
                    note(name + ": no values, using other");
                } else {
                    auto fallback = vocab.resolve(f, options.listener_fallback);
                    if (!fallback) throw ContractError("listener fallback is not a vocabulary category");
                    resolved.insert(*fallback);
                    out.flagged = true;
                    note(name + ": no valid values, fell back to '" + *fallback + "'");
                }
            }
            (f == Field::model_listener ? out.listeners : out.data_types) = std::move(resolved);
        } else {
            std::string value;
            if (resolved.size() == 1) {
                value = *resolved.begin();
            } else {
                value = std::string(kOther);
                note(name + (resolved.empty() ? ": no value, using other" : ": conflicting values, using other"));
            }
            (f == Field::visualization_type ? out.vis_type : out.vis_purpose) = std::move(value);
        }
    }
    return out;
}

FrameworkLabels labels_from_json(const json& j, const LabelVocabulary& vocab) {
    FrameworkLabels l;
    try {
        l.paper_id = j.at("paper_id").get<std::string>();
        l.figure_id = figctx::canonical_figure_id(j.at("figure_id").get<std::string>());
    } catch (const json::exception& e) {
        throw InputError(std::string("label record: ") + e.what());
    }
    l.base_figure_id = figctx::base_figure_id(l.figure_id);
    const auto& payload = j.contains("labels") ? j["labels"] : j;
    for (auto f : kFields) {
        const json* entry = field_entry(payload, f);
        auto raw = raw_values(entry);
        if (raw.empty())
            throw InputError(l.paper_id + " " + l.figure_id + ": no values for " + std::string(field_name(f)));
        std::set<std::string> values;
        for (const auto& r : raw) {
            auto c = vocab.resolve(f, r);
            if (!c)
                throw InputError(l.paper_id + " " + l.figure_id + ": '" + r + "' is not a " +
                                 std::string(field_name(f)) + " category");
            values.insert(*c);
        }
        if (!is_multi_label(f) && values.size() != 1)
            throw InputError(l.paper_id + " " + l.figure_id + ": " + std::string(field_name(f)) +
                             " takes exactly one value");
        l.annotation(f) = raw_annotation(entry, 240);
        if (f == Field::model_listener) l.listeners = std::move(values);
        if (f == Field::data_type) l.data_types = std::move(values);
        if (f == Field::visualization_type) l.vis_type = *values.begin();
        if (f == Field::visualization_purpose) l.vis_purpose = *values.begin();
    }
    l.flagged = j.value("flagged", false);
    if (auto it = j.find("notes"); it != j.end() && it->is_array()) l.notes = it->get<std::vector<std::string>>();
    return l;
}

namespace {

std::string strict_majority(std::vector<std::string> votes) {
    std::map<std::string, std::size_t> tally;
    for (auto& v : votes) ++tally[v];
    for (const auto& [value, n] : tally)
        if (2 * n > votes.size()) return value;
    return std::string(kOther);
}

}  // namespace

FrameworkLabels aggregate_subfigures(std::span<const FrameworkLabels> records) {
    if (records.empty()) throw ContractError("aggregate_subfigures: no records");
    const auto& first = records.front();
    for (const auto& r : records)
        if (r.paper_id != first.paper_id || r.base_figure_id != first.base_figure_id)
            throw ContractError("aggregate_subfigures: mixed figures (" + first.paper_id + " " +
                                first.base_figure_id + " vs " + r.paper_id + " " + r.base_figure_id + ")");

    FrameworkLabels out;
    out.paper_id = first.paper_id;
    out.base_figure_id = first.base_figure_id;
    out.figure_id = first.base_figure_id;
    std::vector<std::string> type_votes, purpose_votes;
    std::set<std::string> notes;
    for (const auto& r : records) {
        out.listeners.insert(r.listeners.begin(), r.listeners.end());
        out.data_types.insert(r.data_types.begin(), r.data_types.end());
        type_votes.push_back(r.vis_type);
        purpose_votes.push_back(r.vis_purpose);
        out.flagged = out.flagged || r.flagged;
        notes.insert(r.notes.begin(), r.notes.end());
    }
    out.vis_type = strict_majority(std::move(type_votes));
    out.vis_purpose = strict_majority(std::move(purpose_votes));
    out.notes.assign(notes.begin(), notes.end());

    for (auto f : kFields) {
        // sorted before summing so the mean is bitwise order-independent
        std::vector<double> conf;
        const FieldAnnotation* best = nullptr;
        for (const auto& r : records) {
            const auto& a = r.annotation(f);
            conf.push_back(a.confidence);
            if (!best || a.confidence > best->confidence ||
                (a.confidence == best->confidence && a.evidence < best->evidence))
                best = &a;
        }
        std::sort(conf.begin(), conf.end());
        double sum = 0.0;
        for (double c : conf) sum += c;
        out.annotation(f) = {sum / static_cast<double>(conf.size()), best->evidence};
    }
    return out;
}

std::vector<FrameworkLabels> aggregate_all(std::span<const FrameworkLabels> records) {
    std::map<std::pair<std::string, std::string>, std::vector<FrameworkLabels>> groups;
    for (const auto& r : records) groups[{r.paper_id, r.base_figure_id}].push_back(r);
    std::vector<FrameworkLabels> out;
    for (auto& [key, group] : groups) out.push_back(aggregate_subfigures(group));
    std::stable_sort(out.begin(), out.end(), [](const FrameworkLabels& a, const FrameworkLabels& b) {
        if (a.paper_id != b.paper_id) return a.paper_id < b.paper_id;
        return figctx::figure_id_less(a.base_figure_id, b.base_figure_id);
    });
    return out;
}

}  // namespace litmine::stage3
