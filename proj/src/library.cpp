#include "litmine/library.hpp"

#include "litmine/error.hpp"
#include "litmine/io.hpp"

namespace litmine {

using nlohmann::json;

CodedPaper coded_paper_from_json(const json& j, const stage3::LabelVocabulary& vocab) {
    CodedPaper cp;
    cp.paper = paper_from_json(j);
    for (const auto& f : j.value("figures", json::array())) {
        json ev = f;
        ev["paper_id"] = cp.paper.paper_id;
        LabeledFigure lf;
        lf.evidence = figctx::evidence_from_json(ev);
        if (auto it = f.find("relevant"); it != f.end() && it->is_boolean()) lf.relevant = it->get<bool>();
        if (auto it = f.find("labels"); it != f.end() && it->is_object()) {
            json rec = {{"paper_id", cp.paper.paper_id}, {"figure_id", lf.evidence.figure_id}, {"labels", *it}};
            lf.labels = stage3::labels_from_json(rec, vocab);
        }
        cp.figures.push_back(std::move(lf));
    }
    return cp;
}

json to_json(const CodedPaper& p) {
    json j = to_json(p.paper);
    json figures = json::array();
    for (const auto& f : p.figures) {
        json fj = figctx::to_json(f.evidence);
        fj.erase("paper_id");
        fj["relevant"] = f.relevant ? json(*f.relevant) : json(nullptr);
        fj["labels"] = f.labels ? stage3::to_payload(*f.labels) : json(nullptr);
        figures.push_back(std::move(fj));
    }
    j["figures"] = std::move(figures);
    return j;
}

FigureLibrary::FigureLibrary(std::vector<CodedPaper> papers, bm25::TokenizerOptions tokenizer)
    : papers_(std::move(papers)), tokenizer_(tokenizer) {
    std::vector<bm25::TokenizedDoc> docs;
    for (const auto& p : papers_) docs.push_back({p.paper.paper_id, bm25::tokenize(p.paper.title_abstract(), tokenizer_)});
    index_ = bm25::Index::build(std::move(docs));
}

const CodedPaper* FigureLibrary::find(std::string_view paper_id) const {
    for (const auto& p : papers_)
        if (p.paper.paper_id == paper_id) return &p;
    return nullptr;
}

FigureLibrary FigureLibrary::without(std::string_view paper_id) const {
    std::vector<CodedPaper> rest;
    for (const auto& p : papers_)
        if (p.paper.paper_id != paper_id) rest.push_back(p);
    return FigureLibrary(std::move(rest), tokenizer_);
}

FigureLibrary load_library(const std::filesystem::path& path, const stage3::LabelVocabulary& vocab,
                           bm25::TokenizerOptions tokenizer) {
    std::vector<CodedPaper> papers;
    for (const auto& j : io::read_jsonl(path)) papers.push_back(coded_paper_from_json(j, vocab));
    return FigureLibrary(std::move(papers), tokenizer);
}

}  // namespace litmine
