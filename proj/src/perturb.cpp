#include "contiguard/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "contiguard/errors.hpp"
#include "contiguard/rng.hpp"

namespace contiguard {

namespace {

const char* kKindNames[] = {"insert",   "remove",       "repeat",   "swap",         "homoglyph",
                            "maskword", "abbreviation", "distract", "authorization"};

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        lines.push_back(line);
    }
    return lines;
}

std::pair<std::string, std::string> split_tab(const std::string& line, const std::string& path) {
    auto pos = line.find('\t');
    if (pos == std::string::npos) throw DataError("expected TAB-separated line in " + path + ": " + line);
    return {line.substr(0, pos), line.substr(pos + 1)};
}

}  // namespace

std::string to_string(PerturbationKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<PerturbationKind> parse_kind(const std::string& name) {
    for (std::size_t i = 0; i < 9; ++i) {
        if (name == kKindNames[i]) return static_cast<PerturbationKind>(i);
    }
    return std::nullopt;
}

Lexicons Lexicons::load(const std::string& dir) {
    Lexicons lex;
    for (const auto& line : read_lines(dir + "/homoglyphs.tsv")) {
        auto [key, value] = split_tab(line, "homoglyphs.tsv");
        auto key_cps = utf8_decode(key);
        if (key_cps.size() != 1) throw DataError("homoglyph key must be one character: " + key);
        std::vector<char32_t> alts;
        for (const auto& alt : split_whitespace(value)) {
            auto cps = utf8_decode(alt);
            if (cps.size() != 1) throw DataError("homoglyph alternative must be one character: " + alt);
            alts.push_back(cps[0]);
        }
        auto& slot = lex.homoglyph_map[key_cps[0]];
        slot.insert(slot.end(), alts.begin(), alts.end());
    }
    for (const auto& line : read_lines(dir + "/abbr.tsv")) {
        auto [phrase, abbr] = split_tab(line, "abbr.tsv");
        lex.abbr_map[ascii_lower(phrase)] = abbr;
        std::size_t words = split_whitespace(phrase).size();
        lex.max_abbr_phrase_words = std::max(lex.max_abbr_phrase_words, words);
    }
    for (const auto& line : read_lines(dir + "/special_chars.txt")) {
        for (char32_t cp : utf8_decode(line)) lex.special_chars.insert(cp);
    }
    lex.distract_words = read_lines(dir + "/distract_words.txt");
    lex.authority_intros = read_lines(dir + "/authority_intros.txt");
    for (const auto& w : read_lines(dir + "/toxic_words.txt")) {
        lex.toxic_relevant_words.insert(ascii_lower(w));
    }
    lex.validate();
    return lex;
}

void Lexicons::validate() const {
    for (const auto& [key, alts] : homoglyph_map) {
        if (alts.empty()) throw DataError("homoglyph entry with no alternatives");
        for (char32_t alt : alts) {
            if (alt == key) throw DataError("homoglyph alternatives must differ from the key");
        }
    }
    for (const auto& [phrase, abbr] : abbr_map) {
        if (phrase != ascii_lower(phrase)) throw DataError("abbr key not lowercase: " + phrase);
        if (abbr.empty()) throw DataError("empty abbreviation for: " + phrase);
    }
    if (special_chars.empty()) throw DataError("special_chars is empty");
    if (distract_words.empty()) throw DataError("distract_words is empty");
    if (authority_intros.empty()) throw DataError("authority_intros is empty");
    if (toxic_relevant_words.empty()) throw DataError("toxic_relevant_words is empty");
}

bool Lexicons::is_toxic_relevant(const std::string& token) const {
    return toxic_relevant_words.count(ascii_lower(strip_punct_edges(token))) > 0;
}

std::vector<std::size_t> select_targets(const std::vector<std::string>& tokens,
                                        const Lexicons& lexicons,
                                        const PerturbConfig& config) {
    if (config.rate <= 0.0 || config.rate > 1.0) {
        throw ConfigError("perturbation rate must be in (0, 1]");
    }
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (lexicons.is_toxic_relevant(tokens[i])) eligible.push_back(i);
    }
    if (eligible.empty() && config.target_any_if_no_relevant) {
        for (std::size_t i = 0; i < tokens.size(); ++i) eligible.push_back(i);
    }
    if (eligible.empty()) return {};
    std::size_t want = static_cast<std::size_t>(std::ceil(config.rate * static_cast<double>(eligible.size())));
    want = std::max<std::size_t>(1, std::min(want, eligible.size()));
    Rng rng = make_rng(config.seed);
    auto picks = sample_without_replacement(rng, eligible.size(), want);
    std::vector<std::size_t> out;
    out.reserve(picks.size());
    for (std::size_t p : picks) out.push_back(eligible[p]);
    std::sort(out.begin(), out.end());
    return out;
}

std::string authorize_prefix(const std::vector<std::string>& intros, std::uint64_t seed) {
    if (intros.empty()) throw ConfigError("authority_intros is empty");
    Rng rng = make_rng(seed);
    return intros[rand_index(rng, intros.size())];
}

namespace {

using CodePoints = std::vector<char32_t>;

char32_t random_special(const Lexicons& lex, Rng& rng) {
    std::size_t idx = rand_index(rng, lex.special_chars.size());
    auto it = lex.special_chars.begin();
    std::advance(it, static_cast<long>(idx));
    return *it;
}

void op_insert(CodePoints& cps, const Lexicons& lex, Rng& rng, int edits) {
    for (int e = 0; e < edits; ++e) {
        // Interior positions keep the edit intra-word ("idi+ot").
        std::size_t pos = cps.size() >= 2 ? 1 + rand_index(rng, cps.size() - 1) : cps.size();
        cps.insert(cps.begin() + static_cast<long>(pos), random_special(lex, rng));
    }
}

void op_remove(CodePoints& cps, Rng& rng, int edits) {
    for (int e = 0; e < edits && cps.size() >= 2; ++e) {
        cps.erase(cps.begin() + static_cast<long>(rand_index(rng, cps.size())));
    }
}

void op_repeat(CodePoints& cps, Rng& rng, int edits) {
    for (int e = 0; e < edits; ++e) {
        if (cps.empty()) return;
        std::size_t pos = rand_index(rng, cps.size());
        cps.insert(cps.begin() + static_cast<long>(pos) + 1, cps[pos]);
    }
}

void op_swap(CodePoints& cps, Rng& rng, int edits) {
    if (cps.size() < 2) return;
    for (int e = 0; e < edits; ++e) {
        std::size_t pos = rand_index(rng, cps.size() - 1);
        std::swap(cps[pos], cps[pos + 1]);
    }
}

bool op_homoglyph(CodePoints& cps, const Lexicons& lex, Rng& rng, int edits) {
    std::vector<std::size_t> mappable;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (lex.homoglyph_map.count(cps[i])) mappable.push_back(i);
    }
    if (mappable.empty()) return false;  // token left unchanged
    auto picks = sample_without_replacement(rng, mappable.size(),
                                            std::min<std::size_t>(static_cast<std::size_t>(edits), mappable.size()));
    for (std::size_t p : picks) {
        std::size_t pos = mappable[p];
        const auto& alts = lex.homoglyph_map.at(cps[pos]);
        cps[pos] = alts[rand_index(rng, alts.size())];
    }
    return true;
}

void op_maskword(CodePoints& cps, const Lexicons& lex, Rng& rng, int edits) {
    if (cps.empty()) return;
    // Keep the first character visible when the token is long enough.
    std::size_t lo = cps.size() >= 2 ? 1 : 0;
    std::size_t span = cps.size() - lo;
    auto picks = sample_without_replacement(rng, span, std::min<std::size_t>(static_cast<std::size_t>(edits), span));
    for (std::size_t p : picks) cps[lo + p] = random_special(lex, rng);
}

// Longest abbr_map phrase starting at token index i; returns word count
// (0 when nothing matches).
std::size_t match_abbr_phrase(const std::vector<TokenSpan>& spans, std::size_t i, const Lexicons& lex,
                              std::string* abbr_out) {
    std::size_t max_len = std::min(lex.max_abbr_phrase_words, spans.size() - i);
    for (std::size_t len = max_len; len >= 1; --len) {
        std::string key;
        for (std::size_t k = 0; k < len; ++k) {
            if (k) key += ' ';
            key += ascii_lower(strip_punct_edges(spans[i + k].text));
        }
        auto it = lex.abbr_map.find(key);
        if (it != lex.abbr_map.end()) {
            *abbr_out = it->second;
            return len;
        }
    }
    return 0;
}

std::string punct_prefix(const std::string& token) {
    auto cps = utf8_decode(token);
    std::size_t b = 0;
    while (b < cps.size() && is_ascii_punct(cps[b])) ++b;
    return utf8_encode(CodePoints(cps.begin(), cps.begin() + static_cast<long>(b)));
}

std::string punct_suffix(const std::string& token) {
    auto cps = utf8_decode(token);
    std::size_t e = cps.size();
    while (e > 0 && is_ascii_punct(cps[e - 1])) --e;
    return utf8_encode(CodePoints(cps.begin() + static_cast<long>(e), cps.end()));
}

struct Replacement {
    std::size_t begin;  // byte range in the original text
    std::size_t end;
    std::string text;
};

std::string splice(const std::string& text, std::vector<Replacement>& reps) {
    std::sort(reps.begin(), reps.end(), [](const Replacement& a, const Replacement& b) { return a.begin < b.begin; });
    std::string out;
    std::size_t cursor = 0;
    for (const auto& r : reps) {
        out += text.substr(cursor, r.begin - cursor);
        out += r.text;
        cursor = r.end;
    }
    out += text.substr(cursor);
    return out;
}

}  // namespace

std::string apply(const std::string& text, const PerturbConfig& config, const Lexicons& lexicons) {
    if (text.empty()) return text;
    if (config.rate <= 0.0 || config.rate > 1.0) throw ConfigError("perturbation rate must be in (0, 1]");
    if (config.edits_per_token < 1) throw ConfigError("edits_per_token must be >= 1");

    switch (config.kind) {
        case PerturbationKind::Distract: {
            Rng rng = make_rng(mix_seed(config.seed, 2));
            std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(config.distract_word_count),
                                                  lexicons.distract_words.size());
            if (n == 0) throw ConfigError("distract_words is empty");
            auto picks = sample_without_replacement(rng, lexicons.distract_words.size(), n);
            std::string prefix;
            for (std::size_t i = 0; i < picks.size(); ++i) {
                if (i) prefix += ' ';
                prefix += lexicons.distract_words[picks[i]];
            }
            return prefix + "; " + text;
        }
        case PerturbationKind::Authorization: {
            return authorize_prefix(lexicons.authority_intros, mix_seed(config.seed, 3)) + "; " + text;
        }
        default:
            break;
    }

    auto spans = token_spans(text);
    std::vector<std::string> tokens;
    tokens.reserve(spans.size());
    for (const auto& sp : spans) tokens.push_back(sp.text);
    auto targets = select_targets(tokens, lexicons, config);
    if (targets.empty()) return text;

    Rng rng = make_rng(mix_seed(config.seed, 1));
    std::vector<Replacement> reps;

    if (config.kind == PerturbationKind::Abbreviation) {
        std::size_t consumed_until = 0;  // phrases must not overlap
        for (std::size_t idx : targets) {
            if (idx < consumed_until) continue;
            std::string abbr;
            std::size_t len = match_abbr_phrase(spans, idx, lexicons, &abbr);
            if (len == 0) continue;  // no entry: token left unchanged
            std::string repl = punct_prefix(spans[idx].text) + abbr + punct_suffix(spans[idx + len - 1].text);
            reps.push_back({spans[idx].begin, spans[idx + len - 1].end, repl});
            consumed_until = idx + len;
        }
        if (reps.empty()) return text;
        return splice(text, reps);
    }

    for (std::size_t idx : targets) {
        auto cps = utf8_decode(tokens[idx]);
        switch (config.kind) {
            case PerturbationKind::Insert:
                op_insert(cps, lexicons, rng, config.edits_per_token);
                break;
            case PerturbationKind::Remove:
                op_remove(cps, rng, config.edits_per_token);
                break;
            case PerturbationKind::Repeat:
                op_repeat(cps, rng, config.edits_per_token);
                break;
            case PerturbationKind::Swap:
                op_swap(cps, rng, config.edits_per_token);
                break;
            case PerturbationKind::Homoglyph:
                if (!op_homoglyph(cps, lexicons, rng, config.edits_per_token)) continue;
                break;
            case PerturbationKind::Maskword:
                op_maskword(cps, lexicons, rng, config.edits_per_token);
                break;
            default:
                throw ConfigError("unknown perturbation kind");
        }
        std::string replaced = utf8_encode(cps);
        if (replaced != tokens[idx]) reps.push_back({spans[idx].begin, spans[idx].end, replaced});
    }
    if (reps.empty()) return text;
    return splice(text, reps);
}

}  // namespace contiguard
