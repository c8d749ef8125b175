#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace ecoecho::text {

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;  // one past the last byte

    std::size_t length() const { return end - begin; }
    bool overlaps(const Span& o) const { return begin < o.end && o.begin < end; }
    bool operator==(const Span&) const = default;
};

std::string trim(std::string_view s);

/// ASCII lower-case with every whitespace run collapsed to one space, trimmed.
std::string normalize(std::string_view s);

/// Case-insensitive search for `phrase` in `haystack` starting at byte `from`.
/// A single space in the (normalized) phrase matches any whitespace run in the
/// haystack, so the returned span indexes the original, unnormalized text.
/// A match must start at a word boundary but may end inside a word.
std::optional<Span> find_phrase(std::string_view haystack, std::string_view phrase,
                                std::size_t from = 0);

bool contains_phrase(std::string_view haystack, std::string_view phrase);

} // namespace ecoecho::text
