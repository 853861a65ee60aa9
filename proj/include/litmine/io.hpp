#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace litmine::io {

using nlohmann::json;

/// One parsed line of a line-delimited JSON stream. Blank lines are skipped;
/// a line that fails to parse is reported with `error` set and `value` null.
struct JsonLine {
    std::size_t line_number = 0;
    json value;
    std::string error;
};

std::vector<JsonLine> parse_jsonl(std::istream& in);

/// Parse every line of a JSONL file; throws InputError naming the first bad line.
std::vector<json> read_jsonl(const std::filesystem::path& path);

json read_json(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

/// Serialize values one per line, each terminated by '\n'.
std::string to_jsonl(const std::vector<json>& values);

/// Write to `<path>.tmp` and rename over `path`, so readers never observe a
/// partially written file at the final path.
void write_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace litmine::io
