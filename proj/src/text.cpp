#include "ecoecho/text.hpp"

#include <cctype>

namespace ecoecho::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Length of the match of `phrase` at `pos`, or 0 when it does not match there.
std::size_t match_at(std::string_view hay, std::string_view phrase, std::size_t pos) {
    std::size_t h = pos;
    for (std::size_t p = 0; p < phrase.size(); ++p) {
        if (phrase[p] == ' ') {
            if (h >= hay.size() || !is_space(hay[h])) return 0;
            while (h < hay.size() && is_space(hay[h])) ++h;
            continue;
        }
        if (h >= hay.size() || lower(hay[h]) != phrase[p]) return 0;
        ++h;
    }
    return h - pos;
}

} // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string normalize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(lower(c));
    }
    return out;
}

std::optional<Span> find_phrase(std::string_view haystack, std::string_view phrase,
                                std::size_t from) {
    const std::string needle = normalize(phrase);
    if (needle.empty()) return std::nullopt;
    for (std::size_t pos = from; pos < haystack.size(); ++pos) {
        // "t energy" must not match inside "that energy"; suffixes ("strikes") are fine.
        if (pos > 0 && is_word(needle.front()) && is_word(haystack[pos - 1])) continue;
        if (std::size_t len = match_at(haystack, needle, pos); len > 0) {
            return Span{pos, pos + len};
        }
    }
    return std::nullopt;
}

bool contains_phrase(std::string_view haystack, std::string_view phrase) {
    return find_phrase(haystack, phrase).has_value();
}

} // namespace ecoecho::text
