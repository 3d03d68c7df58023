#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "contiguard/linalg.hpp"
#include "contiguard/perturb.hpp"

namespace contiguard {

// LLM-produced (or stub-produced) auxiliary record for one sample.
struct AuxiliaryInfo {
    std::string how;
    std::string why;
    std::string what;  // possible meaning + toxicity-related clues
    std::string provider = "stub";  // "llm" or "stub"
    std::string raw_response;
};

// Three-stage interrogation prompt asking the model to explain how it will
// mine meaning and toxicity clues, why, and what they are. Deterministic.
std::string build_prompt(const std::string& text);

// Extracts HOW/WHY/WHAT sections from a model response. Returns nullopt when
// the WHAT section is missing or empty.
std::optional<AuxiliaryInfo> parse_sections(const std::string& content);

// Deterministic offline enricher: reverse homoglyph mapping, abbreviation
// expansion, and toxic-lexicon hit listing on canonical token forms.
class StubEnricher {
public:
    explicit StubEnricher(const Lexicons& lexicons);

    AuxiliaryInfo enrich(const std::string& text) const;
    std::string deobfuscate(const std::string& text) const;
    std::vector<std::string> toxicity_clues(const std::string& deobfuscated) const;

private:
    const Lexicons* lex_;
    std::unordered_map<char32_t, char32_t> reverse_homoglyph_;
    std::unordered_map<std::string, std::string> reverse_abbr_;
    std::unordered_map<std::string, std::string> canon_toxic_;
};

struct LlmClientConfig {
    std::string endpoint;   // e.g. https://api.openai.com/v1/chat/completions
    std::string api_key;
    std::string model = "gpt-4o-mini";
    int retries = 2;
    int timeout_seconds = 30;
    bool stub_mode = true;

    // Reads CONTIGUARD_LLM_ENDPOINT / CONTIGUARD_LLM_API_KEY; stub_mode stays
    // true unless an endpoint is present.
    static LlmClientConfig from_env();
};

// Thread-safe auxiliary cache keyed by sample id, persisted as JSON Lines.
class AuxCache {
public:
    std::optional<AuxiliaryInfo> get(const std::string& id) const;
    void put(const std::string& id, const AuxiliaryInfo& info);
    std::size_t size() const;
    void load_jsonl(const std::string& path);   // merges; missing file is fine
    void save_jsonl(const std::string& path) const;

private:
    mutable std::mutex mu_;
    std::unordered_map<std::string, AuxiliaryInfo> items_;
};

// fetch_auxiliary realization: cache -> LLM endpoint (bounded retries) ->
// stub fallback. The client holds no trainable state.
class AuxiliaryProvider {
public:
    AuxiliaryProvider(const Lexicons& lexicons, LlmClientConfig config);

    AuxiliaryInfo fetch(const std::string& id, const std::string& text);
    AuxCache& cache() { return cache_; }
    const AuxCache& cache() const { return cache_; }
    std::size_t network_calls() const { return network_calls_; }

private:
    AuxiliaryInfo fetch_remote(const std::string& text);

    StubEnricher stub_;
    LlmClientConfig config_;
    AuxCache cache_;
    std::size_t network_calls_ = 0;
};

// ---------------------------------------------------------------------------
// Difference-based dynamical cooperation gate.

struct GateParams {
    Vec conv_kernel;   // width 3, single channel
    Mat gate_weights;  // d x d; pre[j] = sum_i W[i][j] * conv[i] + bias[j]
    Vec gate_bias;     // d
    bool diagonal = false;  // restrict gate_weights to its diagonal

    static GateParams init(int dim, std::uint64_t seed, bool diagonal = false);
    int dim() const { return static_cast<int>(gate_bias.size()); }
};

struct GateGrads {
    Vec conv_kernel;
    Mat gate_weights;
    Vec gate_bias;

    void init_like(const GateParams& p);
};

// Intermediates cached for the backward pass.
struct GateForward {
    Vec diff;  // x_p - x_a
    Vec sq;    // diff^2
    Vec conv;  // smoothed squared difference
    Vec pre;   // affine pre-activation
    Vec w;     // sigmoid(pre), in (0,1)^d
};

GateForward gate_forward(const Vec& x_p, const Vec& x_a, const GateParams& gate);

// Dynamical weights w = sigmoid(W_g^T CONV((x_p - x_a)^2) + b_g).
Vec gate_weights(const Vec& x_p, const Vec& x_a, const GateParams& gate);

// Accumulates parameter gradients and input gradients given dL/dw.
void gate_backward(const GateForward& fwd, const GateParams& gate, const Vec& dw,
                   GateGrads& grads, Vec& dx_p, Vec& dx_a);

// Cooperated features f = (x_p + w * x_a) / (1 + w), elementwise.
Vec cooperate(const Vec& x_p, const Vec& x_a, const Vec& w);

// Accumulates dL/dx_p, dL/dx_a, dL/dw given dL/df.
void cooperate_backward(const Vec& x_p, const Vec& x_a, const Vec& w, const Vec& df,
                        Vec& dx_p, Vec& dx_a, Vec& dw);

}  // namespace contiguard
