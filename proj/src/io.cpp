#include "litmine/io.hpp"

#include <fstream>
#include <sstream>

#include "litmine/error.hpp"
#include "litmine/text.hpp"

namespace litmine::io {

std::vector<JsonLine> parse_jsonl(std::istream& in) {
    std::vector<JsonLine> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        JsonLine parsed;
        parsed.line_number = n;
        try {
            parsed.value = json::parse(line);
        } catch (const json::parse_error& e) {
            parsed.error = e.what();
        }
        out.push_back(std::move(parsed));
    }
    return out;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<json> out;
    for (auto& line : parse_jsonl(in)) {
        if (!line.error.empty())
            throw InputError(path.string() + ":" + std::to_string(line.line_number) + ": " +
                             line.error);
        out.push_back(std::move(line.value));
    }
    return out;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string to_jsonl(const std::vector<json>& values) {
    std::string out;
    for (const auto& v : values) {
        out += v.dump();
        out += '\n';
    }
    return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace litmine::io
