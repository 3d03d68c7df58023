#include "contiguard/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "contiguard/errors.hpp"
#include "contiguard/rng.hpp"

namespace contiguard {

using json = nlohmann::json;

namespace {

json aux_to_json(const AuxiliaryInfo& a) {
    return json{{"how", a.how},
                {"why", a.why},
                {"what", a.what},
                {"provider", a.provider},
                {"raw_response", a.raw_response}};
}

AuxiliaryInfo aux_from_json(const json& j) {
    AuxiliaryInfo a;
    a.how = j.value("how", "");
    a.why = j.value("why", "");
    a.what = j.value("what", "");
    a.provider = j.value("provider", "stub");
    a.raw_response = j.value("raw_response", "");
    return a;
}

}  // namespace

std::vector<LabeledText> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    std::vector<LabeledText> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        LabeledText s;
        s.id = j.at("id").get<std::string>();
        s.text = j.at("text").get<std::string>();
        s.label = j.at("label").get<int>();
        s.perturbation = j.value("perturbation", "ordinary");
        s.split = j.value("split", "");
        if (j.contains("aux") && !j["aux"].is_null()) s.aux = aux_from_json(j["aux"]);
        if (s.label != 0 && s.label != 1) {
            throw DataError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_jsonl(const std::string& path, const std::vector<LabeledText>& samples) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset: " + path);
    for (const auto& s : samples) {
        json j{{"id", s.id},
               {"text", s.text},
               {"label", s.label},
               {"perturbation", s.perturbation},
               {"split", s.split}};
        if (s.aux) j["aux"] = aux_to_json(*s.aux);
        out << j.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------

double LexiconRatioScorer::score(const std::string& text) const {
    auto tokens = split_whitespace(text);
    if (tokens.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& t : tokens) {
        if (lex_->is_toxic_relevant(t)) ++hits;
    }
    double s = static_cast<double>(hits) / static_cast<double>(tokens.size());
    return std::clamp(s, 0.0, 1.0);
}

double HttpToxicityScorer::parse_response(const std::string& body) {
    json j = json::parse(body);
    return j.at("attributeScores").at("TOXICITY").at("summaryScore").at("value").get<double>();
}

double HttpToxicityScorer::score(const std::string& text) const {
    std::string host = endpoint_, path = "/";
    auto scheme_end = endpoint_.find("://");
    std::size_t path_start = endpoint_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        host = endpoint_.substr(0, path_start);
        path = endpoint_.substr(path_start);
    }
    if (!api_key_.empty()) path += (path.find('?') == std::string::npos ? "?key=" : "&key=") + api_key_;
    json body{{"comment", {{"text", text}}}, {"requestedAttributes", {{"TOXICITY", json::object()}}}};
    httplib::Client client(host);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res || res->status != 200) {
        throw DataError("toxicity scorer request failed for endpoint " + endpoint_);
    }
    return parse_response(res->body);
}

DictionarySpellChecker DictionarySpellChecker::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dictionary: " + path);
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        words.insert(ascii_lower(line));
    }
    return DictionarySpellChecker(std::move(words));
}

bool DictionarySpellChecker::known(const std::string& word) const {
    return words_.count(ascii_lower(strip_punct_edges(word))) > 0;
}

// ---------------------------------------------------------------------------

namespace {

const std::regex kEmailRe(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
const std::regex kMentionRe(R"((^|\s)@\w+)");

// Short text that is a whole-string repetition of a shorter token prefix.
bool is_repeated_short(const std::vector<std::string>& tokens) {
    std::size_t n = tokens.size();
    if (n < 2 || n >= 5) return false;
    for (std::size_t period = 1; period <= n / 2; ++period) {
        if (n % period != 0) continue;
        bool all = true;
        for (std::size_t i = period; i < n && all; ++i) {
            all = ascii_lower(tokens[i]) == ascii_lower(tokens[i % period]);
        }
        if (all) return true;
    }
    return false;
}

}  // namespace

std::vector<LabeledText> clean(const std::vector<LabeledText>& raw, const SpellChecker& checker,
                               CleanStats* stats) {
    CleanStats local;
    std::vector<LabeledText> out;
    out.reserve(raw.size());
    for (const auto& s : raw) {
        if (std::regex_search(s.text, kEmailRe) || std::regex_search(s.text, kMentionRe)) {
            ++local.dropped_private;
            continue;
        }
        auto tokens = split_whitespace(s.text);
        if (is_repeated_short(tokens)) {
            ++local.dropped_repeated;
            continue;
        }
        std::vector<std::string> kept;
        kept.reserve(tokens.size());
        for (const auto& t : tokens) {
            if (checker.known(t)) {
                kept.push_back(t);
            } else {
                ++local.tokens_stripped;
            }
        }
        if (kept.empty() || kept.size() * 2 < tokens.size()) {
            ++local.dropped_unknown;
            continue;
        }
        LabeledText c = s;
        if (kept.size() != tokens.size()) {
            std::string joined;
            for (std::size_t i = 0; i < kept.size(); ++i) {
                if (i) joined += ' ';
                joined += kept[i];
            }
            c.text = joined;
        }
        out.push_back(std::move(c));
    }
    if (stats) *stats = local;
    return out;
}

std::vector<LabeledText> rebalance(const std::vector<LabeledText>& data, std::uint64_t seed) {
    std::vector<std::size_t> tox, non;
    for (std::size_t i = 0; i < data.size(); ++i) {
        (data[i].label == 1 ? tox : non).push_back(i);
    }
    if (tox.empty() || non.empty()) throw DataError("rebalance: one label class is empty");
    std::size_t n = std::min(tox.size(), non.size());
    Rng rng = make_rng(seed);
    shuffle_inplace(tox, rng);
    shuffle_inplace(non, rng);
    std::vector<std::size_t> picked(tox.begin(), tox.begin() + static_cast<long>(n));
    picked.insert(picked.end(), non.begin(), non.begin() + static_cast<long>(n));
    std::sort(picked.begin(), picked.end());  // keep original corpus order
    std::vector<LabeledText> out;
    out.reserve(picked.size());
    for (std::size_t i : picked) out.push_back(data[i]);
    return out;
}

namespace {

bool token_equals_word(const std::string& token, const std::string& word) {
    return ascii_lower(strip_punct_edges(token)) == ascii_lower(word);
}

std::string remove_word(const std::string& text, const std::string& word) {
    std::vector<std::string> kept;
    for (const auto& t : split_whitespace(text)) {
        if (!token_equals_word(t, word)) kept.push_back(t);
    }
    std::string joined;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i) joined += ' ';
        joined += kept[i];
    }
    return joined;
}

bool contains_word(const std::string& text, const std::string& word) {
    for (const auto& t : split_whitespace(text)) {
        if (token_equals_word(t, word)) return true;
    }
    return false;
}

}  // namespace

double toxicity_drop_expectation(const std::string& word, const std::vector<LabeledText>& texts,
                                 const ToxicityScorer& scorer) {
    if (texts.empty()) throw DataError("toxicity_drop_expectation: no texts for word " + word);
    double sum = 0.0;
    for (const auto& t : texts) {
        double before, after;
        try {
            before = scorer.score(t.text);
            after = scorer.score(remove_word(t.text, word));
        } catch (const std::exception& e) {
            throw DataError("scorer failed on sample " + t.id + ": " + e.what());
        }
        sum += before - after;
    }
    return sum / static_cast<double>(texts.size());
}

double mutual_information(const std::string& word, const std::vector<LabeledText>& corpus) {
    if (corpus.empty()) return 0.0;
    std::size_t n = corpus.size();
    std::size_t n_word = 0, n_toxic = 0, n_joint = 0;
    for (const auto& s : corpus) {
        bool has = contains_word(s.text, word);
        if (has) ++n_word;
        if (s.label == 1) ++n_toxic;
        if (has && s.label == 1) ++n_joint;
    }
    if (n_joint == 0) return 0.0;
    double p_joint = static_cast<double>(n_joint) / static_cast<double>(n);
    double p_word = static_cast<double>(n_word) / static_cast<double>(n);
    double p_toxic = static_cast<double>(n_toxic) / static_cast<double>(n);
    return p_joint / (p_word * p_toxic);
}

std::set<std::string> select_spurious(const std::vector<std::string>& words,
                                      const std::vector<LabeledText>& corpus) {
    if (words.size() < 2) return {};
    std::vector<double> mi(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) mi[i] = mutual_information(words[i], corpus);
    double mean = 0.0;
    for (double v : mi) mean += v;
    mean /= static_cast<double>(mi.size());
    double var = 0.0;
    for (double v : mi) var += (v - mean) * (v - mean);
    var /= static_cast<double>(mi.size());  // population variance
    double threshold = mean + std::sqrt(var);
    std::set<std::string> out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (mi[i] > threshold) out.insert(words[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------

SplitCounts split_counts(int n) {
    SplitCounts c;
    c.train = static_cast<int>(std::floor(0.6 * n));
    c.valid = static_cast<int>(std::floor(0.1 * n));
    c.test = n - c.train - c.valid;
    return c;
}

namespace {

// Stratified split assignment within one kind: the floor rule applies per
// label group, keeping every split near 1:1.
void assign_splits(std::vector<LabeledText>& samples, std::uint64_t seed) {
    std::vector<std::size_t> tox, non;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        (samples[i].label == 1 ? tox : non).push_back(i);
    }
    Rng rng = make_rng(seed);
    for (auto* group : {&tox, &non}) {
        shuffle_inplace(*group, rng);
        SplitCounts c = split_counts(static_cast<int>(group->size()));
        for (std::size_t i = 0; i < group->size(); ++i) {
            auto& s = samples[(*group)[i]];
            if (static_cast<int>(i) < c.train) {
                s.split = "train";
            } else if (static_cast<int>(i) < c.train + c.valid) {
                s.split = "valid";
            } else {
                s.split = "test";
            }
        }
    }
}

}  // namespace

std::vector<LabeledText> build_dynescape(const std::vector<LabeledText>& clean_data,
                                         const BinaryTextClassifier& detector,
                                         const Lexicons& lexicons, const DynescapeOptions& options) {
    std::vector<std::size_t> toxic_pool, nontoxic_pool;
    for (std::size_t i = 0; i < clean_data.size(); ++i) {
        (clean_data[i].label == 1 ? toxic_pool : nontoxic_pool).push_back(i);
    }
    Rng rng = make_rng(options.seed);
    shuffle_inplace(toxic_pool, rng);
    shuffle_inplace(nontoxic_pool, rng);

    std::unordered_set<std::string> used;  // source ids claimed by a kept sample
    std::vector<LabeledText> out;

    for (PerturbationKind kind : options.kinds) {
        const std::string kind_name = to_string(kind);
        int need_toxic = options.per_kind_quota / 2;
        int need_non = options.per_kind_quota - need_toxic;

        std::vector<LabeledText> kept;
        kept.reserve(static_cast<std::size_t>(options.per_kind_quota));

        auto perturb_one = [&](const LabeledText& src) {
            PerturbConfig cfg = options.perturb;
            cfg.kind = kind;
            cfg.target_any_if_no_relevant = true;
            cfg.seed = mix_seed(options.seed, mix_seed(hash_string(kind_name), hash_string(src.id)));
            return apply(src.text, cfg, lexicons);
        };

        int kept_toxic = 0;
        for (std::size_t idx : toxic_pool) {
            if (kept_toxic >= need_toxic) break;
            const auto& src = clean_data[idx];
            if (used.count(src.id)) continue;
            std::string ptext = perturb_one(src);
            if (detector.predict(ptext) != 0) continue;  // caught, not an evader
            LabeledText s;
            s.id = src.id + "-" + kind_name;
            s.text = ptext;
            s.label = 1;
            s.perturbation = kind_name;
            kept.push_back(std::move(s));
            used.insert(src.id);
            ++kept_toxic;
        }
        int kept_non = 0;
        for (std::size_t idx : nontoxic_pool) {
            if (kept_non >= need_non) break;
            const auto& src = clean_data[idx];
            if (used.count(src.id)) continue;
            LabeledText s;
            s.id = src.id + "-" + kind_name;
            s.text = perturb_one(src);
            s.label = 0;
            s.perturbation = kind_name;
            kept.push_back(std::move(s));
            used.insert(src.id);
            ++kept_non;
        }
        if (kept_toxic < need_toxic || kept_non < need_non) {
            std::cerr << "[build_dynescape] warning: kind " << kind_name << " quota short ("
                      << kept_toxic << "/" << need_toxic << " toxic evaders, " << kept_non << "/"
                      << need_non << " non-toxic)\n";
        }
        assign_splits(kept, mix_seed(options.seed, hash_string(kind_name)));
        out.insert(out.end(), kept.begin(), kept.end());
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

const char* kToxicPatterns[] = {
    "you are a complete {t}",
    "what a {t} thing to say you {t}",
    "only a {t} would believe this",
    "stop acting like a {t} all the time",
    "everyone here thinks you are a {t}",
    "shut up you pathetic {t}",
    "your little plan is {t} garbage",
    "nobody wants a {t} like you around",
    "that was the most {t} idea ever",
    "you {t} go bother someone else",
    "honestly you sound like a {t}",
    "quit being such a {t} about it",
};

const char* kBenignPatterns[] = {
    "the {b} looks lovely this morning",
    "i really enjoyed the {b} today",
    "we should visit the {b} next week",
    "my {b} arrived earlier than expected",
    "that {b} near the {b} is beautiful",
    "please bring the {b} when you come",
    "the {b} and the {b} match nicely",
    "i spent the afternoon by the {b}",
    "thanks for sharing the {b} with us",
    "her {b} collection keeps growing every year",
    "a warm {b} makes the evening better",
    "they painted the {b} a gentle color",
};

std::string fill_pattern(const std::string& pattern, const std::vector<std::string>& vocab, Rng& rng,
                         const std::string& slot) {
    std::string out = pattern;
    std::size_t pos;
    while ((pos = out.find(slot)) != std::string::npos) {
        out.replace(pos, slot.size(), vocab[rand_index(rng, vocab.size())]);
    }
    return out;
}

}  // namespace

std::vector<LabeledText> synthesize_raw(int n, std::uint64_t seed, const Lexicons& lexicons,
                                        double noise_fraction) {
    std::vector<std::string> toxic_vocab(lexicons.toxic_relevant_words.begin(),
                                         lexicons.toxic_relevant_words.end());
    std::sort(toxic_vocab.begin(), toxic_vocab.end());
    const std::vector<std::string>& benign_vocab = lexicons.distract_words;

    Rng rng = make_rng(seed);
    std::vector<LabeledText> out;
    out.reserve(static_cast<std::size_t>(n));
    constexpr std::size_t kNumToxicPatterns = sizeof(kToxicPatterns) / sizeof(kToxicPatterns[0]);
    constexpr std::size_t kNumBenignPatterns = sizeof(kBenignPatterns) / sizeof(kBenignPatterns[0]);
    for (int i = 0; i < n; ++i) {
        LabeledText s;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "raw-%06d", i);
        s.id = buf;
        s.label = (i % 2 == 0) ? 1 : 0;
        if (noise_fraction > 0.0 && rand_real(rng) < noise_fraction) {
            // Noise the cleaner must remove.
            if (rng() % 2 == 0) {
                s.text = "contact me at someone@example.com about this";
                s.label = 0;
            } else {
                s.text = "spam spam spam";
                s.label = 0;
            }
            out.push_back(std::move(s));
            continue;
        }
        if (s.label == 1) {
            s.text = fill_pattern(kToxicPatterns[rand_index(rng, kNumToxicPatterns)], toxic_vocab, rng, "{t}");
        } else {
            s.text = fill_pattern(kBenignPatterns[rand_index(rng, kNumBenignPatterns)], benign_vocab, rng, "{b}");
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace contiguard
