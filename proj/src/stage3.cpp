#include "litmine/stage3.hpp"

#include <map>

#include "litmine/error.hpp"
#include "litmine/parallel.hpp"
#include "litmine/text.hpp"

namespace litmine::stage3 {

using nlohmann::json;

std::vector<std::string> figure_tokens(const figctx::FigureEvidence& figure, std::size_t caption_repeats,
                                       const bm25::TokenizerOptions& tokenizer) {
    auto caption = bm25::tokenize(figure.caption, tokenizer);
    std::vector<std::string> out;
    out.reserve(caption.size() * caption_repeats);
    for (std::size_t i = 0; i < caption_repeats; ++i) out.insert(out.end(), caption.begin(), caption.end());
    for (const auto& p : figure.context) {
        auto t = bm25::tokenize(p, tokenizer);
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

const FigureDoc* FigureCorpus::find(std::string_view doc_id) const {
    auto it = positions.find(std::string(doc_id));
    return it == positions.end() ? nullptr : &docs[it->second];
}

FigureCorpus build_figure_corpus(std::span<const LabeledEvidence> figures, const Options& options) {
    FigureCorpus corpus;
    std::vector<bm25::TokenizedDoc> tokenized;
    for (const auto& f : figures) {
        auto id = f.evidence.paper_id + "#" + f.evidence.figure_id;
        if (text::trim(f.evidence.caption).empty()) {
            corpus.warnings.push_back(id + ": no caption; not indexed");
            continue;
        }
        if (corpus.positions.contains(id)) {
            corpus.warnings.push_back(id + ": duplicate figure; not indexed");
            continue;
        }
        tokenized.push_back({id, figure_tokens(f.evidence, options.caption_repeats, options.tokenizer)});
        corpus.positions.emplace(id, corpus.docs.size());
        corpus.docs.push_back({id, f.evidence, f.labels});
    }
    corpus.index = bm25::Index::build(std::move(tokenized));
    return corpus;
}

FigureCorpus build_figure_corpus(const FigureLibrary& library, const Options& options) {
    std::vector<LabeledEvidence> figures;
    for (const auto& p : library.papers())
        for (const auto& f : p.figures)
            if (f.labels) figures.push_back({f.evidence, *f.labels});
    return build_figure_corpus(figures, options);
}

std::vector<FigureHit> retrieve_similar_figures(const figctx::FigureEvidence& target, const FigureCorpus& corpus,
                                                std::size_t k, std::size_t per_paper_cap,
                                                const std::optional<std::string>& exclude_paper,
                                                const Options& options) {
    std::vector<FigureHit> hits;
    if (k == 0 || corpus.docs.empty()) return hits;
    auto query = figure_tokens(target, options.caption_repeats, options.tokenizer);
    std::map<std::string, std::size_t> per_paper;
    for (const auto& scored : corpus.index.top_k(query, corpus.docs.size())) {
        const auto* doc = corpus.find(scored.doc_id);
        const auto& paper = doc->evidence.paper_id;
        if (exclude_paper && paper == *exclude_paper) continue;
        if (per_paper[paper] >= per_paper_cap) continue;
        ++per_paper[paper];
        hits.push_back({doc->doc_id, paper, doc->evidence.figure_id, scored.score});
        if (hits.size() == k) break;
    }
    return hits;
}

json exemplar_payload(const FrameworkLabels& labels) {
    json out = json::object();
    for (auto f : kFields) {
        auto values = labels.values(f);
        if (is_multi_label(f))
            out[std::string(field_name(f))] = {{"values", values}};
        else
            out[std::string(field_name(f))] = {{"value", *values.begin()}};
    }
    return out;
}

llm::PromptRequest extraction_request(const figctx::FigureEvidence& target, std::span<const FigureHit> exemplars,
                                      const FigureCorpus& corpus) {
    std::vector<llm::Exemplar> shots;
    for (const auto& hit : exemplars) {
        if (hit.paper_id == target.paper_id) throw ContractError("exemplar from the target's own paper " + hit.paper_id);
        const auto* doc = corpus.find(hit.doc_id);
        if (!doc) throw ContractError("exemplar " + hit.doc_id + " not in figure corpus");
        shots.push_back({hit.doc_id, doc->evidence.assembled, exemplar_payload(doc->labels)});
    }
    return llm::PromptRequest::make(llm::kExtractionSchema, std::move(shots), target.paper_id + "#" + target.figure_id,
                                    target.assembled);
}

json extract_labels(const figctx::FigureEvidence& target, std::span<const FigureHit> exemplars,
                    const FigureCorpus& corpus, llm::Gateway& gateway) {
    auto raw = gateway.complete(extraction_request(target, exemplars, corpus));
    return llm::extract_json_object(raw).value_or(json::object());
}

Result run_stage3(std::span<const figctx::FigureEvidence> targets, const FigureCorpus& corpus, llm::Gateway& gateway,
                  const LabelVocabulary& vocab, const Options& options) {
    Result result;
    result.figures.resize(targets.size());
    parallel_for(targets.size(), options.threads, [&](std::size_t i) {
        auto& out = result.figures[i];
        out.target = targets[i];
        out.exemplars = retrieve_similar_figures(targets[i], corpus, options.k, options.per_paper_cap,
                                                 targets[i].paper_id, options);
        try {
            auto payload = extract_labels(targets[i], out.exemplars, corpus, gateway);
            auto labels = normalize_labels(payload, vocab, options.normalize);
            labels.paper_id = targets[i].paper_id;
            labels.figure_id = targets[i].figure_id;
            labels.base_figure_id = targets[i].base_figure_id;
            out.labels = std::move(labels);
        } catch (const llm::BackendUnavailable& e) {
            out.error = e.what();
        }
    });
    std::vector<FrameworkLabels> labelled;
    for (const auto& f : result.figures) {
        if (f.labels)
            labelled.push_back(*f.labels);
        else
            result.retry.push_back(f.target.paper_id + "#" + f.target.figure_id);
    }
    result.labels = aggregate_all(labelled);
    return result;
}

}  // namespace litmine::stage3
