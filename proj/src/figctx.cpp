#include "litmine/figctx.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_set>

#include "litmine/error.hpp"
#include "litmine/text.hpp"

namespace litmine::figctx {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool starts_with_icase(std::string_view s, std::size_t pos, std::string_view prefix) {
    if (s.size() - pos < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (lower(s[pos + i]) != prefix[i]) return false;
    return true;
}

struct Match {
    FigureRef ref;
    std::size_t end = 0;
    bool plural = false;
};

// Parses the number and optional sub-figure letter at `pos`.
std::optional<Match> parse_number_at(std::string_view s, std::size_t pos) {
    std::size_t i = pos;
    int number = 0;
    while (i < s.size() && is_digit(s[i]) && i - pos < 6) number = number * 10 + (s[i++] - '0');
    if (i == pos) return std::nullopt;
    if (i < s.size() && is_digit(s[i])) return std::nullopt;
    Match m;
    m.ref.number = number;
    if (i < s.size() && is_alpha(s[i]) && (i + 1 == s.size() || !is_alpha(s[i + 1]))) {
        m.ref.sub = lower(s[i]);
        ++i;
    } else if (i + 2 < s.size() && s[i] == '(' && is_alpha(s[i + 1]) && s[i + 2] == ')') {
        m.ref.sub = lower(s[i + 1]);
        i += 3;
    }
    m.end = i;
    return m;
}

// Parses "Fig. 3", "Figures 2", "FIG 4b" at `pos` (which must be a word start).
std::optional<Match> parse_label_at(std::string_view s, std::size_t pos) {
    static constexpr std::pair<std::string_view, bool> words[] = {
        {"figures", true}, {"figure", false}, {"figs", true}, {"fig", false}};
    for (auto [word, plural] : words) {
        if (!starts_with_icase(s, pos, word)) continue;
        std::size_t i = pos + word.size();
        if (i < s.size() && is_alpha(s[i])) continue;
        if (i < s.size() && s[i] == '.') ++i;
        while (i < s.size() && is_space(s[i])) ++i;
        auto m = parse_number_at(s, i);
        if (!m) return std::nullopt;
        m->plural = plural;
        return m;
    }
    return std::nullopt;
}

bool caption_punct_at(std::string_view s, std::size_t i) {
    if (i >= s.size()) return false;
    char c = s[i];
    if (c == ':' || c == '.' || c == '|' || c == '-') return true;
    // en dash / em dash
    return s.substr(i, 3) == "\xE2\x80\x93" || s.substr(i, 3) == "\xE2\x80\x94";
}

std::optional<FigureRef> caption_header(std::string_view paragraph) {
    std::size_t start = 0;
    while (start < paragraph.size() && is_space(paragraph[start])) ++start;
    auto m = parse_label_at(paragraph, start);
    if (!m || m->plural) return std::nullopt;
    std::size_t i = m->end;
    while (i < paragraph.size() && paragraph[i] == ' ') ++i;
    if (!caption_punct_at(paragraph, i)) return std::nullopt;
    return m->ref;
}

bool is_roman(std::string_view tok) {
    if (tok.empty()) return false;
    return std::all_of(tok.begin(), tok.end(), [](char c) {
        return std::string_view("ivxlcdm").find(lower(c)) != std::string_view::npos;
    });
}

bool is_section_cutoff(std::string_view paragraph) {
    auto tokens = text::whitespace_tokens(paragraph);
    if (tokens.empty() || tokens.size() > 3) return false;
    auto first = std::string_view(tokens.front());
    bool numbering = std::all_of(first.begin(), first.end(), [](char c) { return is_digit(c) || c == '.'; });
    if (!numbering && first.size() > 1 && first.back() == '.') numbering = is_roman(first.substr(0, first.size() - 1));
    if (numbering && tokens.size() > 1) tokens.erase(tokens.begin());
    auto head = text::to_lower(text::join(tokens, " "));
    while (!head.empty() && (head.back() == ':' || head.back() == '.')) head.pop_back();
    static const std::unordered_set<std::string> cutoffs = {
        "references",     "bibliography",    "acknowledgments", "acknowledgements",
        "acknowledgment", "acknowledgement", "reference"};
    return cutoffs.contains(head);
}

bool has_letter(std::string_view s) { return std::any_of(s.begin(), s.end(), is_alpha); }

bool all_upper(std::string_view s) {
    return has_letter(s) &&
           std::none_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

}  // namespace

std::string FigureRef::id() const {
    auto out = base_id();
    if (sub) out.push_back(sub);
    return out;
}

std::string FigureRef::base_id() const { return "Figure " + std::to_string(number); }

std::optional<FigureRef> parse_figure_id(std::string_view text) {
    auto t = text::trim(text);
    auto m = parse_label_at(t, 0);
    if (!m) return std::nullopt;
    return m->ref;
}

std::string canonical_figure_id(std::string_view text) {
    auto ref = parse_figure_id(text);
    if (!ref) throw InputError("not a figure identifier: '" + std::string(text) + "'");
    return ref->id();
}

std::string base_figure_id(std::string_view figure_id) {
    auto ref = parse_figure_id(figure_id);
    if (!ref) throw InputError("not a figure identifier: '" + std::string(figure_id) + "'");
    return ref->base_id();
}

bool figure_id_less(std::string_view a, std::string_view b) {
    auto ra = parse_figure_id(a);
    auto rb = parse_figure_id(b);
    if (ra && rb) return *ra != *rb ? *ra < *rb : a < b;
    if (ra != rb) return ra.has_value();
    return a < b;
}

DocumentText segment_paragraphs(std::string_view raw, std::string paper_id, std::string provenance) {
    if (text::trim(raw).empty()) throw InputError("segment_paragraphs: empty document");
    DocumentText doc{std::move(paper_id), {}, std::move(provenance)};
    std::string block;
    auto flush = [&] {
        auto t = text::trim(block);
        if (!t.empty()) doc.paragraphs.emplace_back(t);
        block.clear();
    };
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto nl = raw.find('\n', pos);
        auto line = raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (text::trim(line).empty()) {
            flush();
        } else {
            if (!block.empty()) block.push_back('\n');
            block.append(line);
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    flush();
    return doc;
}

DocumentText filter_nonbody(const DocumentText& doc, const FilterOptions& options) {
    DocumentText out{doc.paper_id, {}, doc.provenance};
    for (const auto& p : doc.paragraphs) {
        if (is_section_cutoff(p)) break;
        if (!has_letter(p)) continue;
        if (caption_header(p)) {
            out.paragraphs.push_back(p);
            continue;
        }
        if (all_upper(p)) continue;
        if (text::whitespace_tokens(p).size() < options.min_tokens) continue;
        out.paragraphs.push_back(p);
    }
    return out;
}

CaptionScan detect_captions(const DocumentText& doc) {
    CaptionScan scan;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
        auto ref = caption_header(doc.paragraphs[i]);
        if (!ref) continue;
        auto id = ref->id();
        if (!seen.insert(id).second) {
            scan.warnings.push_back(doc.paper_id + ": duplicate caption for " + id +
                                    " at paragraph " + std::to_string(i) + " ignored");
            continue;
        }
        scan.captions.push_back({id, doc.paragraphs[i], i});
    }
    return scan;
}

std::vector<FigureRef> find_references(std::string_view p) {
    std::vector<FigureRef> refs;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i > 0 && text::is_word_byte(p[i - 1])) continue;
        if (lower(p[i]) != 'f') continue;
        auto m = parse_label_at(p, i);
        if (!m) continue;
        refs.push_back(m->ref);
        std::size_t j = m->end;
        // "Figures 2, 3 and 5"
        while (m->plural) {
            std::size_t k = j;
            while (k < p.size() && (is_space(p[k]) || p[k] == ',' || p[k] == '&')) ++k;
            if (starts_with_icase(p, k, "and") && k + 3 < p.size() && is_space(p[k + 3])) k += 3;
            while (k < p.size() && is_space(p[k])) ++k;
            if (k == j) break;
            auto next = parse_number_at(p, k);
            if (!next) break;
            refs.push_back(next->ref);
            j = next->end;
        }
        i = j > i ? j - 1 : i;
    }
    return refs;
}

std::string assemble(std::string_view caption, const std::vector<std::string>& context) {
    std::string out(caption);
    for (const auto& c : context) {
        out += "\n\n";
        out += c;
    }
    return out;
}

nlohmann::json to_json(const FigureEvidence& e) {
    return {{"paper_id", e.paper_id},
            {"figure_id", e.figure_id},
            {"base_figure_id", e.base_figure_id},
            {"caption", e.caption},
            {"context", e.context},
            {"context_positions", e.context_positions},
            {"evidence", e.assembled}};
}

FigureEvidence evidence_from_json(const nlohmann::json& j) {
    FigureEvidence e;
    try {
        e.paper_id = j.at("paper_id").get<std::string>();
        e.figure_id = canonical_figure_id(j.at("figure_id").get<std::string>());
        e.base_figure_id = base_figure_id(e.figure_id);
        e.caption = j.value("caption", std::string{});
        e.context = j.value("context", std::vector<std::string>{});
        e.context_positions = j.value("context_positions", std::vector<std::size_t>{});
    } catch (const nlohmann::json::exception& ex) {
        throw InputError(std::string("bad figure evidence record: ") + ex.what());
    }
    e.assembled = j.contains("evidence") ? j["evidence"].get<std::string>() : assemble(e.caption, e.context);
    return e;
}

FigureEvidence extract_evidence(const DocumentText& doc, std::string_view figure_id) {
    auto target = parse_figure_id(figure_id);
    if (!target) throw InputError("not a figure identifier: '" + std::string(figure_id) + "'");
    auto scan = detect_captions(doc);
    std::set<std::size_t> caption_paragraphs;
    const Caption* own = nullptr;
    for (const auto& c : scan.captions) {
        caption_paragraphs.insert(c.paragraph);
        if (c.figure_id == target->id()) own = &c;
    }
    if (!own) throw InputError(doc.paper_id + ": no caption for " + target->id());

    auto hits_target = [&](const FigureRef& r) {
        return r.number == target->number && (r.sub == '\0' || target->sub == '\0' || r.sub == target->sub);
    };
    std::set<std::size_t> window;
    const auto n = doc.paragraphs.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (caption_paragraphs.contains(i)) continue;
        auto refs = find_references(doc.paragraphs[i]);
        if (std::none_of(refs.begin(), refs.end(), hits_target)) continue;
        if (i > 0) window.insert(i - 1);
        window.insert(i);
        if (i + 1 < n) window.insert(i + 1);
    }
    window.erase(own->paragraph);

    FigureEvidence e;
    e.paper_id = doc.paper_id;
    e.figure_id = target->id();
    e.base_figure_id = target->base_id();
    e.caption = own->text;
    for (auto pos : window) {
        e.context.push_back(doc.paragraphs[pos]);
        e.context_positions.push_back(pos);
    }
    e.assembled = assemble(e.caption, e.context);
    return e;
}

DocumentEvidence process_document(std::string_view raw, std::string paper_id, const FilterOptions& options) {
    auto doc = filter_nonbody(segment_paragraphs(raw, std::move(paper_id)), options);
    auto scan = detect_captions(doc);
    DocumentEvidence out;
    out.warnings = std::move(scan.warnings);
    std::set<int> captioned;
    for (const auto& c : scan.captions) {
        out.figures.push_back(extract_evidence(doc, c.figure_id));
        captioned.insert(parse_figure_id(c.figure_id)->number);
    }
    std::set<int> missing;
    for (const auto& p : doc.paragraphs)
        for (const auto& r : find_references(p))
            if (!captioned.contains(r.number)) missing.insert(r.number);
    for (int number : missing)
        out.warnings.push_back(doc.paper_id + ": Figure " + std::to_string(number) +
                               " is referenced but has no caption; skipped");
    return out;
}

}  // namespace litmine::figctx
