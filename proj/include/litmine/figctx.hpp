#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace litmine::figctx {

struct DocumentText {
    std::string paper_id;
    std::vector<std::string> paragraphs;
    std::string provenance;
};

/// A parsed figure identifier such as "Figure 3" or "Figure 3b".
struct FigureRef {
    int number = 0;
    char sub = '\0';  // lowercase sub-figure letter, '\0' if none

    std::string id() const;       // "Figure 3b"
    std::string base_id() const;  // "Figure 3"
    auto operator<=>(const FigureRef&) const = default;
};

/// Parses "Fig. 3", "fig 3a:", "Figure 10", "FIGURE 2(b)". Returns nullopt
/// if the text does not start with a figure label.
std::optional<FigureRef> parse_figure_id(std::string_view text);

/// "Fig. 3:" -> "Figure 3"; idempotent. Throws InputError if unparseable.
std::string canonical_figure_id(std::string_view text);
/// "Figure 3a" -> "Figure 3".
std::string base_figure_id(std::string_view figure_id);

/// Natural ordering on figure ids ("Figure 2" < "Figure 10" < "Figure 10a");
/// unparseable ids sort after parseable ones, lexicographically.
bool figure_id_less(std::string_view a, std::string_view b);

/// Split on blank lines, trim each block. Throws InputError on empty input.
DocumentText segment_paragraphs(std::string_view raw, std::string paper_id = {},
                                std::string provenance = {});

struct FilterOptions {
    std::size_t min_tokens = 5;
};

/// Drops non-body fragments: everything from a References/Bibliography/
/// Acknowledgments header onward, paragraphs with no letters (page numbers
/// and similar artifacts), all-uppercase headers, and paragraphs below
/// `min_tokens` whitespace tokens. Caption paragraphs are exempt from the
/// length and uppercase rules.
DocumentText filter_nonbody(const DocumentText& doc, const FilterOptions& options = {});

struct Caption {
    std::string figure_id;
    std::string text;
    std::size_t paragraph = 0;
};

struct CaptionScan {
    std::vector<Caption> captions;
    std::vector<std::string> warnings;
};

/// A paragraph is a caption when it starts with "Fig."/"Figure", an
/// identifier, and then punctuation. Duplicate ids keep the first caption.
CaptionScan detect_captions(const DocumentText& doc);

/// In-text figure references in a paragraph ("see Fig. 3", "Figures 2 and 4").
std::vector<FigureRef> find_references(std::string_view paragraph);

struct FigureEvidence {
    std::string paper_id;
    std::string figure_id;
    std::string base_figure_id;
    std::string caption;
    std::vector<std::string> context;
    /// Document positions of `context`, strictly increasing.
    std::vector<std::size_t> context_positions;
    std::string assembled;

    bool operator==(const FigureEvidence&) const = default;
};

/// Caption followed by context paragraphs, separated by blank lines.
std::string assemble(std::string_view caption, const std::vector<std::string>& context);

nlohmann::json to_json(const FigureEvidence& evidence);
FigureEvidence evidence_from_json(const nlohmann::json& j);

/// Collects every non-caption paragraph referencing the figure and keeps the
/// paragraph before and after each hit, clipped to the document and merged.
/// The figure's own caption paragraph is never part of the context. A
/// reference to "Figure 3" also hits sub-figures "Figure 3a"; a reference to
/// "Figure 3b" hits "Figure 3" and "Figure 3b" only. Throws InputError when
/// the document has no caption for `figure_id`.
FigureEvidence extract_evidence(const DocumentText& doc, std::string_view figure_id);

struct DocumentEvidence {
    std::vector<FigureEvidence> figures;
    std::vector<std::string> warnings;
};

/// segment -> filter -> detect captions -> extract evidence for each caption.
/// Figures referenced in the text but never captioned are skipped and logged.
DocumentEvidence process_document(std::string_view raw, std::string paper_id,
                                  const FilterOptions& options = {});

}  // namespace litmine::figctx
