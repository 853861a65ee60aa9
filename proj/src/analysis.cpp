#include "litmine/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "litmine/error.hpp"
#include "litmine/io.hpp"

namespace litmine::analysis {

using nlohmann::json;

namespace {

std::array<std::vector<std::string>, 4> field_sets(const FrameworkLabels& labels) {
    std::array<std::vector<std::string>, 4> sets;
    for (auto f : stage3::kFields) {
        auto values = labels.values(f);
        values.erase("");
        if (values.empty())
            throw InputError(labels.paper_id + " " + labels.figure_id + ": no " + std::string(stage3::field_name(f)) +
                             " label to build paths from");
        sets[static_cast<std::size_t>(f)].assign(values.begin(), values.end());
    }
    return sets;
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

json to_json(const PathRecord& path) {
    json j = {{"paper_id", path.paper_id}, {"base_figure_id", path.base_figure_id}};
    for (auto f : stage3::kFields) j[std::string(stage3::field_name(f))] = path.stages[static_cast<std::size_t>(f)];
    return j;
}

std::vector<PathRecord> expand_paths(const FrameworkLabels& labels) {
    auto sets = field_sets(labels);
    std::vector<PathRecord> out;
    std::array<std::size_t, 4> idx{};
    while (true) {
        PathRecord p{labels.paper_id, labels.base_figure_id, {}};
        for (std::size_t s = 0; s < 4; ++s) p.stages[s] = sets[s][idx[s]];
        out.push_back(std::move(p));
        // odometer increment, last stage fastest
        std::size_t s = 4;
        while (s > 0) {
            --s;
            if (++idx[s] < sets[s].size()) break;
            idx[s] = 0;
            if (s == 0) return out;
        }
    }
}

std::vector<EdgeRecord> expand_edges(const FrameworkLabels& labels) {
    auto sets = field_sets(labels);
    std::vector<EdgeRecord> out;
    for (std::size_t s = 0; s + 1 < 4; ++s)
        for (const auto& a : sets[s])
            for (const auto& b : sets[s + 1]) out.push_back({labels.paper_id, labels.base_figure_id, s, a, b});
    return out;
}

const SankeyNode* Sankey::node(std::size_t stage, std::string_view category) const {
    for (const auto& n : nodes)
        if (n.stage == stage && n.category == category) return &n;
    return nullptr;
}

const SankeyLink* Sankey::link(std::size_t from_stage, std::string_view source, std::string_view target) const {
    for (const auto& l : links)
        if (l.from_stage == from_stage && l.source == source && l.target == target) return &l;
    return nullptr;
}

json to_json(const Sankey& sankey) {
    auto stage_name = [](std::size_t s) { return std::string(stage3::field_name(stage3::kFields[s])); };
    json nodes = json::array();
    for (const auto& n : sankey.nodes)
        nodes.push_back({{"stage", stage_name(n.stage)}, {"category", n.category}, {"total", n.total}});
    json links = json::array();
    for (const auto& l : sankey.links)
        links.push_back({{"source_stage", stage_name(l.from_stage)},
                         {"target_stage", stage_name(l.from_stage + 1)},
                         {"source", l.source},
                         {"target", l.target},
                         {"count", l.count}});
    return {{"path_count", sankey.path_count}, {"nodes", nodes}, {"links", links}};
}

Sankey sankey_export(std::span<const PathRecord> paths) {
    if (paths.empty()) throw ContractError("sankey_export: no paths");
    std::map<std::pair<std::size_t, std::string>, std::size_t> nodes;
    std::map<std::tuple<std::size_t, std::string, std::string>, std::size_t> links;
    for (const auto& p : paths) {
        for (std::size_t s = 0; s < 4; ++s) ++nodes[{s, p.stages[s]}];
        for (std::size_t s = 0; s + 1 < 4; ++s) ++links[{s, p.stages[s], p.stages[s + 1]}];
    }
    Sankey out;
    out.path_count = paths.size();
    for (const auto& [key, total] : nodes) out.nodes.push_back({key.first, key.second, total});
    for (const auto& [key, count] : links) out.links.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
    return out;
}

PaperLift lift_to_papers(std::span<const FrameworkLabels> figures, const Corpus& papers) {
    std::map<std::string, PaperLabels> by_id;
    std::set<std::string> missing;
    for (const auto& fig : figures) {
        const auto* record = papers.find(fig.paper_id);
        if (!record) {
            missing.insert(fig.paper_id);
            continue;
        }
        auto [it, inserted] = by_id.try_emplace(fig.paper_id);
        auto& pl = it->second;
        if (inserted) {
            pl.paper_id = record->paper_id;
            pl.year = record->year;
            pl.citation_count = record->citation_count;
        }
        for (auto f : stage3::kFields) {
            auto values = fig.values(f);
            values.erase("");
            pl.values[static_cast<std::size_t>(f)].merge(values);
        }
    }
    PaperLift out;
    for (auto& [id, pl] : by_id) out.papers.push_back(std::move(pl));
    for (const auto& id : missing) out.warnings.push_back("labels for unknown paper " + id + " skipped");
    return out;
}

std::vector<YearRow> yearly_proportions(std::span<const PaperLabels> papers, Field field,
                                        std::span<const std::string> categories) {
    std::map<int, std::vector<const PaperLabels*>> by_year;
    for (const auto& p : papers) {
        if (p.of(field).empty())
            throw InputError(p.paper_id + " has no " + std::string(stage3::field_name(field)) + " label");
        by_year[p.year].push_back(&p);
    }
    std::vector<YearRow> out;
    for (const auto& [year, members] : by_year) {
        YearRow row{year, members.size(), {}};
        for (const auto& c : categories) {
            std::size_t n = 0;
            for (const auto* p : members) n += p->of(field).contains(c);
            row.proportion[c] = static_cast<double>(n) / static_cast<double>(members.size());
        }
        out.push_back(std::move(row));
    }
    return out;
}

double citation_weight(std::int64_t citations, int year, int reference_year) {
    if (citations < 0) throw InputError("negative citation count");
    if (year > reference_year)
        throw InputError("publication year " + std::to_string(year) + " is after the reference year " +
                         std::to_string(reference_year));
    return static_cast<double>(citations) / static_cast<double>(reference_year - year + 1);
}

std::vector<CoverageRow> Coverage::ranked() const {
    auto out = rows;
    std::stable_sort(out.begin(), out.end(), [](const CoverageRow& a, const CoverageRow& b) {
        if (a.weighted_share != b.weighted_share) return a.weighted_share > b.weighted_share;
        if (a.prevalence != b.prevalence) return a.prevalence > b.prevalence;
        return a.category < b.category;
    });
    return out;
}

Coverage weighted_coverage(std::span<const PaperLabels> papers, Field field, std::span<const std::string> categories,
                           int reference_year) {
    if (papers.empty()) throw ContractError("weighted_coverage: no papers");
    // sum in paper_id order so the totals do not depend on input order
    std::vector<const PaperLabels*> sorted;
    for (const auto& p : papers) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->paper_id < b->paper_id; });

    std::vector<double> weights(sorted.size(), 0.0);
    Coverage out;
    out.field = field;
    out.papers = sorted.size();
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (!sorted[i]->citation_count) continue;
        weights[i] = citation_weight(*sorted[i]->citation_count, sorted[i]->year, reference_year);
        out.total_weight += weights[i];
        ++out.weighted_papers;
    }
    out.weighted_empty = out.total_weight <= 0.0;
    for (const auto& c : categories) {
        CoverageRow row{c, 0, 0.0, 0.0};
        double w = 0.0;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (!sorted[i]->of(field).contains(c)) continue;
            ++row.carriers;
            w += weights[i];
        }
        row.prevalence = static_cast<double>(row.carriers) / static_cast<double>(out.papers);
        if (!out.weighted_empty) row.weighted_share = w / out.total_weight;
        out.rows.push_back(std::move(row));
    }
    return out;
}

Exports build_exports(std::span<const FrameworkLabels> figures, const Corpus& papers,
                      const stage3::LabelVocabulary& vocab, int reference_year) {
    Exports out;
    std::vector<PathRecord> paths;
    std::array<std::size_t, 3> edges{};
    for (const auto& fig : figures) {
        auto p = expand_paths(fig);
        paths.insert(paths.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
        for (const auto& e : expand_edges(fig)) ++edges[e.from_stage];
    }

    std::vector<json> path_lines;
    for (const auto& p : paths) path_lines.push_back(to_json(p));
    out.paths_jsonl = io::to_jsonl(path_lines);

    json sankey = paths.empty() ? json{{"path_count", 0}, {"nodes", json::array()}, {"links", json::array()}}
                                : to_json(sankey_export(paths));
    sankey["figures"] = figures.size();
    sankey["edge_counts"] = json::array();
    for (std::size_t s = 0; s < 3; ++s)
        sankey["edge_counts"].push_back({{"source_stage", stage3::field_name(stage3::kFields[s])},
                                         {"target_stage", stage3::field_name(stage3::kFields[s + 1])},
                                         {"count", edges[s]}});
    out.sankey_json = sankey.dump(2) + "\n";

    auto lift = lift_to_papers(figures, papers);
    out.warnings = lift.warnings;

    std::ostringstream trends;
    trends << "field,year,papers,category,proportion\n";
    std::ostringstream weights;
    weights << "field,rank,category,carriers,prevalence,weighted_share,weighted_papers,total_weight\n";
    if (!lift.papers.empty()) {
        for (auto f : stage3::kFields) {
            const auto& cats = vocab.categories(f);
            auto name = std::string(stage3::field_name(f));
            for (const auto& row : yearly_proportions(lift.papers, f, cats))
                for (const auto& c : cats)
                    trends << name << ',' << row.year << ',' << row.papers << ',' << csv_field(c) << ','
                           << fixed(row.proportion.at(c)) << '\n';
            auto cov = weighted_coverage(lift.papers, f, cats, reference_year);
            if (cov.weighted_empty) out.warnings.push_back(name + ": no citation weight, weighted shares left empty");
            std::size_t rank = 0;
            for (const auto& row : cov.ranked())
                weights << name << ',' << ++rank << ',' << csv_field(row.category) << ',' << row.carriers << ','
                        << fixed(row.prevalence) << ',' << (cov.weighted_empty ? "" : fixed(row.weighted_share)) << ','
                        << cov.weighted_papers << ',' << fixed(cov.total_weight) << '\n';
        }
    }
    out.trends_csv = trends.str();
    out.weights_csv = weights.str();
    return out;
}

}  // namespace litmine::analysis
