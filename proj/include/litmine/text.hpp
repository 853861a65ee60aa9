#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace litmine::text {

/// ASCII lowercase; bytes outside ASCII pass through unchanged.
std::string to_lower(std::string_view s);

std::string_view trim(std::string_view s);

/// Lowercase, trim, map '_' to ' ' and collapse whitespace runs to one space.
std::string squash(std::string_view s);

/// True for ASCII letters/digits and for every non-ASCII byte, so UTF-8
/// sequences stay inside a word.
bool is_word_byte(char c);

/// Lowercase word tokens split on non-alphanumeric boundaries.
std::vector<std::string> words(std::string_view s);

/// Whitespace-separated tokens, unmodified.
std::vector<std::string> whitespace_tokens(std::string_view s);

bool contains_icase(std::string_view haystack, std::string_view needle);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::vector<std::string> split(std::string_view s, char sep);

/// Truncate to at most `max_chars` UTF-8 code points without splitting a sequence.
std::string truncate_utf8(std::string_view s, std::size_t max_chars);

}  // namespace litmine::text
