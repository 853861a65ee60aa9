#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "litmine/bm25.hpp"
#include "litmine/corpus.hpp"
#include "litmine/figctx.hpp"
#include "litmine/vocabulary.hpp"

namespace litmine {

/// A figure from a manually coded paper. `relevant` is set only for figures
/// with an explicit relevance judgement; `labels` only for coded figures.
struct LabeledFigure {
    figctx::FigureEvidence evidence;
    std::optional<bool> relevant;
    std::optional<stage3::FrameworkLabels> labels;
};

struct CodedPaper {
    PaperRecord paper;
    std::vector<LabeledFigure> figures;
};

/// Reads one library line: paper fields at top level plus
///   "figures": [{figure evidence fields, "relevant": bool|null, "labels": {...}|null}]
CodedPaper coded_paper_from_json(const nlohmann::json& j, const stage3::LabelVocabulary& vocab);
nlohmann::json to_json(const CodedPaper& paper);

/// Manually coded papers used as the retrieval sample library in stages 2
/// and 3, with a title+abstract BM25 index over them.
class FigureLibrary {
  public:
    FigureLibrary() = default;
    explicit FigureLibrary(std::vector<CodedPaper> papers, bm25::TokenizerOptions tokenizer = {});

    const std::vector<CodedPaper>& papers() const { return papers_; }
    std::size_t size() const { return papers_.size(); }
    bool empty() const { return papers_.empty(); }
    const CodedPaper* find(std::string_view paper_id) const;
    const bm25::Index& paper_index() const { return index_; }
    const bm25::TokenizerOptions& tokenizer() const { return tokenizer_; }

    /// The library with one paper removed and the index rebuilt, so corpus
    /// statistics carry nothing from the held-out paper.
    FigureLibrary without(std::string_view paper_id) const;

  private:
    std::vector<CodedPaper> papers_;
    bm25::TokenizerOptions tokenizer_;
    bm25::Index index_;
};

FigureLibrary load_library(const std::filesystem::path& path, const stage3::LabelVocabulary& vocab,
                           bm25::TokenizerOptions tokenizer = {});

}  // namespace litmine
