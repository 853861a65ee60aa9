#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "litmine/corpus.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(LITMINE_TEST_DATA); }

class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("litmine_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

  private:
    fs::path path_;
};

inline litmine::PaperRecord paper(std::string id, std::string title, std::string abstract = {}, int year = 2020,
                                  litmine::Label label = litmine::Label::unlabeled) {
    litmine::PaperRecord p;
    p.paper_id = std::move(id);
    p.title = std::move(title);
    p.abstract = std::move(abstract);
    p.year = year;
    p.label = label;
    return p;
}

// Pool from records that already carry their labels.
inline litmine::LabeledPool make_pool(std::vector<litmine::PaperRecord> records) {
    litmine::Corpus corpus(std::move(records));
    auto assignments = litmine::assignments_from_records(corpus);
    return litmine::load_labeled_pool(corpus, assignments);
}

inline fs::path fixture_dir() { return data_dir() / "fixture"; }

}  // namespace testing_support
