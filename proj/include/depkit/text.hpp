#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace depkit::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

// Field escaping for the tab-separated formats: `\t`, `\n`, `\r`, `\\`.
std::string escape_field(std::string_view s);
std::string unescape_field(std::string_view s);

// Lowercased runs of alphanumeric bytes (bytes >= 0x80 count as word
// characters so UTF-8 words stay whole) plus each punctuation byte as its own
// token. Used by the encoder tokenizer.
std::vector<std::string> word_piece_tokens(std::string_view s);

// Lowercased alphanumeric runs of length >= 2; punctuation dropped. Used by
// the TF-IDF and document-embedding baselines.
std::vector<std::string> word_tokens(std::string_view s);

// 64-bit FNV-1a; stable across platforms, used for cache keys and run names.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace depkit::text
