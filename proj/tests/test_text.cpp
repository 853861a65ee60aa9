#include <gtest/gtest.h>

#include <sstream>

#include "litmine/error.hpp"
#include "litmine/hash.hpp"
#include "litmine/io.hpp"
#include "litmine/text.hpp"
#include "support.hpp"

using namespace litmine;
using testing_support::TempDir;

TEST(Text, SquashNormalizesCaseUnderscoresAndSpacing) {
    EXPECT_EQ(text::squash("  Output_Results  "), "output results");
    EXPECT_EQ(text::squash("Node-Link\t\tDiagram"), "node-link diagram");
    EXPECT_EQ(text::squash(""), "");
}

TEST(Text, WordsSplitOnPunctuationAndKeepUtf8Together) {
    EXPECT_EQ(text::words("BM25, t-SNE!"), (std::vector<std::string>{"bm25", "t", "sne"}));
    EXPECT_EQ(text::words("caf\xc3\xa9 au lait"), (std::vector<std::string>{"caf\xc3\xa9", "au", "lait"}));
}

TEST(Text, TruncateNeverSplitsACodePoint) {
    std::string s = "a\xc3\xa9\xc3\xa9z";  // a é é z
    EXPECT_EQ(text::truncate_utf8(s, 2), "a\xc3\xa9");
    EXPECT_EQ(text::truncate_utf8(s, 10), s);
    EXPECT_EQ(text::truncate_utf8(s, 0), "");
}

TEST(Text, SplitKeepsEmptyFields) {
    EXPECT_EQ(text::split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
}

TEST(Text, ContainsIgnoresCase) {
    EXPECT_TRUE(text::contains_icase("Saliency Maps", "saliency"));
    EXPECT_FALSE(text::contains_icase("Saliency", "maps"));
}

TEST(Hash, KnownSha256Vectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, JsonlSkipsBlankLinesAndReportsBadOnes) {
    std::istringstream in("{\"a\":1}\n\n  \nnot json\n[2]\n");
    auto lines = io::parse_jsonl(in);
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0].value["a"], 1);
    EXPECT_EQ(lines[1].line_number, 4u);
    EXPECT_FALSE(lines[1].error.empty());
    EXPECT_EQ(lines[2].value[0], 2);
}

TEST(Io, ReadJsonlNamesTheBadLine) {
    TempDir dir;
    io::write_atomic(dir / "x.jsonl", "{}\n{oops\n");
    try {
        io::read_jsonl(dir / "x.jsonl");
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("x.jsonl:2"), std::string::npos);
    }
}

TEST(Io, AtomicWriteLeavesNoTemporary) {
    TempDir dir;
    io::write_atomic(dir / "sub" / "out.txt", "first");
    io::write_atomic(dir / "sub" / "out.txt", "second");
    EXPECT_EQ(io::read_text(dir / "sub" / "out.txt"), "second");
    EXPECT_FALSE(std::filesystem::exists(dir / "sub" / "out.txt.tmp"));
    EXPECT_EQ(sha256_file(dir / "sub" / "out.txt"), sha256_hex("second"));
}
