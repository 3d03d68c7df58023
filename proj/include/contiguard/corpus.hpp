#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "contiguard/enrich.hpp"
#include "contiguard/perturb.hpp"

namespace contiguard {

// One text sample. `perturbation` is a kind name or "ordinary"; `split` is
// train/valid/test (empty until assigned).
struct LabeledText {
    std::string id;
    std::string text;
    int label = 0;  // 0 non-toxic, 1 toxic
    std::string perturbation = "ordinary";
    std::string split;
    std::optional<AuxiliaryInfo> aux;
};

std::vector<LabeledText> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<LabeledText>& samples);

// ---------------------------------------------------------------------------

class ToxicityScorer {
public:
    virtual ~ToxicityScorer() = default;
    virtual double score(const std::string& text) const = 0;  // in [0,1]
};

// Offline scorer: fraction of tokens found in toxic_relevant_words.
class LexiconRatioScorer : public ToxicityScorer {
public:
    explicit LexiconRatioScorer(const Lexicons& lexicons) : lex_(&lexicons) {}
    double score(const std::string& text) const override;

private:
    const Lexicons* lex_;
};

// Perspective-style HTTP scorer. score() posts {comment:{text}} and reads
// attributeScores.TOXICITY.summaryScore.value.
class HttpToxicityScorer : public ToxicityScorer {
public:
    HttpToxicityScorer(std::string endpoint, std::string api_key)
        : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)) {}
    double score(const std::string& text) const override;

    static double parse_response(const std::string& body);  // exposed for tests

private:
    std::string endpoint_;
    std::string api_key_;
};

class SpellChecker {
public:
    virtual ~SpellChecker() = default;
    virtual bool known(const std::string& word) const = 0;
};

class DictionarySpellChecker : public SpellChecker {
public:
    static DictionarySpellChecker from_file(const std::string& path);
    explicit DictionarySpellChecker(std::unordered_set<std::string> words) : words_(std::move(words)) {}
    bool known(const std::string& word) const override;

private:
    std::unordered_set<std::string> words_;
};

// ---------------------------------------------------------------------------

struct CleanStats {
    std::size_t dropped_private = 0;   // emails / user ids
    std::size_t dropped_repeated = 0;  // repeated sentences under 5 words
    std::size_t dropped_unknown = 0;   // >50% unknown tokens
    std::size_t tokens_stripped = 0;
};

// Drops private-information and degenerate samples, strips unknown tokens.
std::vector<LabeledText> clean(const std::vector<LabeledText>& raw, const SpellChecker& checker,
                               CleanStats* stats = nullptr);

// Downsamples the majority class to an exact 1:1 label ratio.
std::vector<LabeledText> rebalance(const std::vector<LabeledText>& data, std::uint64_t seed);

// E_w = mean over texts of [s(t) - s(t without w)]. Words with E_w > 0
// contribute to the sample's toxicity.
double toxicity_drop_expectation(const std::string& word, const std::vector<LabeledText>& texts,
                                 const ToxicityScorer& scorer);

// MI = p(w,c) / (p(w,.) p(.,c)) for c = toxic, probabilities estimated from
// document-presence counts. Absent word -> 0.
double mutual_information(const std::string& word, const std::vector<LabeledText>& corpus);

// Words whose MI exceeds mean + population std (strict).
std::set<std::string> select_spurious(const std::vector<std::string>& words,
                                      const std::vector<LabeledText>& corpus);

// ---------------------------------------------------------------------------

// Reference detector interface attacked during dataset construction.
class BinaryTextClassifier {
public:
    virtual ~BinaryTextClassifier() = default;
    virtual int predict(const std::string& text) const = 0;  // 0 or 1
};

class ThresholdDetector : public BinaryTextClassifier {
public:
    ThresholdDetector(const ToxicityScorer& scorer, double threshold)
        : scorer_(&scorer), threshold_(threshold) {}
    int predict(const std::string& text) const override {
        return scorer_->score(text) >= threshold_ ? 1 : 0;
    }

private:
    const ToxicityScorer* scorer_;
    double threshold_;
};

struct DynescapeOptions {
    std::vector<PerturbationKind> kinds;
    int per_kind_quota = 500;
    std::uint64_t seed = 0;
    PerturbConfig perturb;  // kind/seed overwritten per sample
};

struct SplitCounts {
    int train = 0;
    int valid = 0;
    int test = 0;
};

// 6:1:3 split: train = floor(0.6 n), valid = floor(0.1 n), test = rest.
SplitCounts split_counts(int n);

// Attack-and-select: perturbs pool samples per kind, keeps toxic evaders the
// detector misses plus identically perturbed non-toxic samples; source ids
// never overlap across kinds. Short quotas produce a warning, not an error.
std::vector<LabeledText> build_dynescape(const std::vector<LabeledText>& clean_data,
                                         const BinaryTextClassifier& detector,
                                         const Lexicons& lexicons, const DynescapeOptions& options);

// Synthetic raw corpus (balanced toxic/non-toxic template sentences) for
// desk-scale runs. noise_fraction injects samples the cleaner must drop.
std::vector<LabeledText> synthesize_raw(int n, std::uint64_t seed, const Lexicons& lexicons,
                                        double noise_fraction = 0.0);

}  // namespace contiguard
