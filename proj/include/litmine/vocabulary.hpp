#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace litmine::stage3 {

enum class Field { model_listener, data_type, visualization_type, visualization_purpose };

inline constexpr std::array<Field, 4> kFields = {Field::model_listener, Field::data_type,
                                                 Field::visualization_type, Field::visualization_purpose};

std::string_view field_name(Field field);
/// Accepts the snake_case field names.
std::optional<Field> parse_field(std::string_view name);
/// Listener and data type take several values; the two visualization fields take one.
constexpr bool is_multi_label(Field f) { return f == Field::model_listener || f == Field::data_type; }

inline constexpr std::string_view kOther = "other";

/// Controlled categories per field plus an alias table mapping surface forms
/// to canonical categories. Immutable once built; safe to share across threads.
class LabelVocabulary {
  public:
    /// The four canonical category sets, with no aliases.
    static LabelVocabulary standard();
    /// The seeded alias table (same content as data/aliases.json).
    static const nlohmann::json& default_aliases();
    /// Standard categories plus default aliases.
    static LabelVocabulary with_default_aliases();

    /// {"model_listener": [...], ...} and {"visualization_type": {"scatter plot": "statistical chart"}, ...}.
    /// Throws InputError when a field is missing or an alias targets an unknown category.
    static LabelVocabulary from_json(const nlohmann::json& categories, const nlohmann::json& aliases);

    const std::vector<std::string>& categories(Field field) const;
    bool contains(Field field, std::string_view canonical) const;
    bool has_other(Field field) const { return contains(field, kOther); }

    /// Canonical category for a surface form (case, whitespace and '_'
    /// insensitive), via exact category match first and the alias table second.
    std::optional<std::string> resolve(Field field, std::string_view surface) const;

    /// Throws InputError if `canonical` is not a category of `field`.
    void add_alias(Field field, std::string_view surface, std::string_view canonical);
    std::size_t alias_count() const;

    /// True when the category sets equal standard() exactly.
    bool matches_standard() const;

  private:
    struct FieldVocab {
        std::vector<std::string> categories;
        std::map<std::string, std::string> by_key;  // squashed form -> canonical
        std::map<std::string, std::string> aliases;
    };
    const FieldVocab& at(Field f) const { return fields_[static_cast<std::size_t>(f)]; }
    FieldVocab& at(Field f) { return fields_[static_cast<std::size_t>(f)]; }

    std::array<FieldVocab, 4> fields_;
};

struct FieldAnnotation {
    double confidence = 0.0;
    std::string evidence;

    bool operator==(const FieldAnnotation&) const = default;
};

/// Four-field annotation of one figure (or one base figure after aggregation).
struct FrameworkLabels {
    std::string paper_id;
    std::string figure_id;
    std::string base_figure_id;
    std::set<std::string> listeners;
    std::set<std::string> data_types;
    std::string vis_type;
    std::string vis_purpose;
    std::array<FieldAnnotation, 4> annotations;  // indexed by Field
    bool flagged = false;                        // listener set needed the fallback
    std::vector<std::string> notes;

    /// Values of a field as a set (single-label fields give a singleton).
    std::set<std::string> values(Field field) const;
    FieldAnnotation& annotation(Field f) { return annotations[static_cast<std::size_t>(f)]; }
    const FieldAnnotation& annotation(Field f) const { return annotations[static_cast<std::size_t>(f)]; }

    /// Equality of the label content only (ids, values, annotations).
    bool same_labels(const FrameworkLabels& other) const;
};

nlohmann::json to_json(const FrameworkLabels& labels);
/// Reads the to_json() form (gold labels, stage 3 output). Values are
/// resolved against the vocabulary; throws InputError for values it does not know.
FrameworkLabels labels_from_json(const nlohmann::json& j, const LabelVocabulary& vocab);

/// The reply-shaped payload for a label record, as shown in exemplars.
nlohmann::json to_payload(const FrameworkLabels& labels);

struct NormalizeOptions {
    std::size_t evidence_cap = 240;
    /// Listener used when no predicted listener survives normalization;
    /// the record is flagged when it is applied.
    std::string listener_fallback = "output results";
};

/// Total. Values are squashed, alias-mapped and validated; unknown values
/// become "other" where the field has it. The listener field has no "other":
/// unknown listeners are dropped and noted. Missing single-label values
/// become "other". Confidences are clipped to [0,1]; evidence is truncated to
/// `evidence_cap` characters.
FrameworkLabels normalize_labels(const nlohmann::json& payload, const LabelVocabulary& vocab,
                                 const NormalizeOptions& options = {});

/// Merge sub-figure records of one base figure: set union for multi-label
/// fields, strict-majority vote for single-label fields (no majority ->
/// "other"), mean confidence, evidence of the most confident record.
/// Permutation-invariant. Throws ContractError on empty input or mixed
/// paper/base figure ids.
FrameworkLabels aggregate_subfigures(std::span<const FrameworkLabels> records);

/// Groups by (paper_id, base_figure_id) and aggregates each group; output
/// sorted by paper_id then natural figure order.
std::vector<FrameworkLabels> aggregate_all(std::span<const FrameworkLabels> records);

}  // namespace litmine::stage3
