#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace contiguard {

// Minimal UTF-8 handling: perturbation operators and the encoder work on
// code points so multi-byte homoglyphs keep length invariants meaningful.
// Invalid bytes decode as U+FFFD and round-trip as such.

std::vector<char32_t> utf8_decode(std::string_view s);
std::string utf8_encode(const std::vector<char32_t>& cps);
void utf8_append(std::string& out, char32_t cp);

// Whitespace-delimited token over the original byte string.
struct TokenSpan {
    std::size_t begin = 0;  // byte offset
    std::size_t end = 0;    // one past last byte
    std::string text;
};

std::vector<TokenSpan> token_spans(std::string_view text);
std::vector<std::string> split_whitespace(std::string_view text);

// ASCII-only case folding; non-ASCII passes through.
std::string ascii_lower(std::string_view s);

bool is_ascii_punct(char32_t cp);

// Strips leading/trailing ASCII punctuation (lexicon lookups only; the
// original token keeps its punctuation).
std::string strip_punct_edges(std::string_view token);

// Collapses runs of a repeated code point to a single occurrence
// ("iiiddioot" -> "idiot"-comparable canonical form).
std::string squeeze_repeats(std::string_view s);

// Removes every occurrence of the given code points.
std::string remove_code_points(std::string_view s, const std::vector<char32_t>& banned);

// Encoder-side normalization: ASCII lowercase, capped at max_chars code
// points. Input is assumed NFC; no recomposition is attempted.
std::string normalize_text(std::string_view s, std::size_t max_chars);

}  // namespace contiguard
