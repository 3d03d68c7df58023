#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "contiguard/text.hpp"

namespace contiguard {

// The nine evasive perturbation operators. Each value identifies one
// perturbation domain in the continual sequence.
enum class PerturbationKind {
    Insert,
    Remove,
    Repeat,
    Swap,
    Homoglyph,
    Maskword,
    Abbreviation,
    Distract,
    Authorization,
};

inline constexpr std::array<PerturbationKind, 9> kAllPerturbationKinds = {
    PerturbationKind::Insert,       PerturbationKind::Remove,   PerturbationKind::Repeat,
    PerturbationKind::Swap,         PerturbationKind::Homoglyph, PerturbationKind::Maskword,
    PerturbationKind::Abbreviation, PerturbationKind::Distract, PerturbationKind::Authorization,
};

std::string to_string(PerturbationKind kind);
std::optional<PerturbationKind> parse_kind(const std::string& name);

// Lookup tables backing the operators. Immutable after load; safe to share
// across threads.
struct Lexicons {
    // character -> visually similar alternatives (never contains the key).
    std::unordered_map<char32_t, std::vector<char32_t>> homoglyph_map;
    // lowercase word/phrase -> abbreviation or slang form.
    std::map<std::string, std::string> abbr_map;
    std::set<char32_t> special_chars;
    std::vector<std::string> distract_words;
    std::vector<std::string> authority_intros;
    std::unordered_set<std::string> toxic_relevant_words;
    std::size_t max_abbr_phrase_words = 1;

    // Loads homoglyphs.tsv, abbr.tsv, special_chars.txt, distract_words.txt,
    // authority_intros.txt, toxic_words.txt from `dir`. Throws DataError on
    // missing files or invariant violations.
    static Lexicons load(const std::string& dir);
    void validate() const;

    bool is_toxic_relevant(const std::string& token) const;
};

struct PerturbConfig {
    PerturbationKind kind = PerturbationKind::Insert;
    double rate = 0.2;      // fraction of eligible words perturbed
    std::uint64_t seed = 0;
    int edits_per_token = 1;
    int distract_word_count = 5;
    // Dataset-builder fallback: when a text has no toxicity-relevant token,
    // treat every token as eligible so non-toxic samples carry the same
    // perturbation artifacts as toxic ones.
    bool target_any_if_no_relevant = false;
};

// Indices of tokens to perturb: toxicity-relevant tokens sampled without
// replacement at config.rate (rounded up, at least 1 when any token is
// eligible). Deterministic under config.seed. Returned sorted.
std::vector<std::size_t> select_targets(const std::vector<std::string>& tokens,
                                        const Lexicons& lexicons,
                                        const PerturbConfig& config);

// Applies the configured operator. Pure function of (text, config, lexicons).
std::string apply(const std::string& text, const PerturbConfig& config, const Lexicons& lexicons);

// One authority self-introduction sampled from the shipped templates.
std::string authorize_prefix(const std::vector<std::string>& intros, std::uint64_t seed);

}  // namespace contiguard
