#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace graphsearch::text {

/// ASCII case folding; non-ASCII bytes pass through unchanged.
std::string case_fold(std::string_view s);

std::string_view trim(std::string_view s);

/// Trims and collapses every internal whitespace run to one space.
std::string collapse_whitespace(std::string_view s);

/// Identity key for entity names: case-folded, whitespace-collapsed.
std::string normalize_name(std::string_view s);

/// Removes leading and trailing ASCII punctuation (and any whitespace exposed by it).
std::string_view strip_surrounding_punctuation(std::string_view s);

/// Case fold, collapse whitespace, strip surrounding punctuation.
std::string normalize_answer(std::string_view s);

/// Half-open byte range of one chunking unit inside a text.
struct UnitSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const UnitSpan&, const UnitSpan&) = default;
};

/// Whitespace-delimited words.
std::vector<UnitSpan> whitespace_units(std::string_view s);

/// Lower-cased maximal runs of ASCII alphanumerics.
std::vector<std::string> word_tokens(std::string_view s);

std::vector<std::string_view> split_lines(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace graphsearch::text
