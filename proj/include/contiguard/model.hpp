#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "contiguard/enrich.hpp"
#include "contiguard/linalg.hpp"

namespace contiguard {

using FeatureVector = Vec;

struct ModelConfig {
    int dim = 64;        // feature dimension d
    int hidden = 32;     // head hidden width h
    int buckets = 1 << 16;
    int max_chars = 360;
    bool gate_diagonal = false;
};

// All trainable state: hashed n-gram embedding table, two-layer classifier
// head, and the cooperation gate (optimized jointly with the rest).
struct DetectorParams {
    ModelConfig config;
    Mat embedding;      // buckets x dim
    Mat head_hidden_w;  // dim x hidden
    Vec head_hidden_b;  // hidden
    Mat head_out_w;     // hidden x 2
    Vec head_out_b;     // 2
    GateParams gate;

    static DetectorParams init(const ModelConfig& config, std::uint64_t seed);
};

// Hashed character 3-5-gram buckets of the normalized text (lowercased,
// capped at max_chars code points). Empty text -> empty list.
std::vector<std::uint32_t> encode_buckets(const std::string& text, const ModelConfig& config);

// Mean of the embedding rows for the given buckets; zero vector when empty.
FeatureVector encode_from_buckets(const std::vector<std::uint32_t>& buckets, const Mat& embedding);

FeatureVector encode(const std::string& text, const DetectorParams& params);

// A sample with its bucket lists precomputed (text and, when enrichment is
// available, auxiliary text). Encoding text to buckets is deterministic, so
// this is done once per sample.
struct PreparedSample {
    std::string id;
    int label = 0;
    std::string domain;  // perturbation kind name
    std::vector<std::uint32_t> text_buckets;
    std::vector<std::uint32_t> aux_buckets;
};

PreparedSample prepare_sample(const std::string& id, const std::string& text, int label,
                              const std::string& domain, const std::string& aux_text,
                              const ModelConfig& config);

// ---------------------------------------------------------------------------
// Two-layer head: z = W2^T tanh(W1^T f + b1) + b2.

struct HeadForward {
    Vec a1;  // pre-activation
    Vec t;   // tanh(a1)
    Vec z;   // logits
    Vec p;   // softmax(z)
};

HeadForward head_forward(const DetectorParams& params, const Vec& f);
Vec head_logits(const DetectorParams& params, const Vec& f);

// Probability pair for a feature vector (softmax over the head output).
Vec classify(const DetectorParams& params, const FeatureVector& feature);

// d logit_y / d f at feature f (used by integrated gradients).
Vec head_feature_gradient(const DetectorParams& params, const Vec& f, int y);

struct HeadGrads {
    Mat hidden_w;
    Vec hidden_b;
    Mat out_w;
    Vec out_b;
};

struct Gradients {
    HeadGrads head;
    GateGrads gate;
    std::map<std::uint32_t, Vec> embedding;  // touched rows only; ordered

    void init_like(const DetectorParams& params);
    void add_embedding_row(std::uint32_t row, const Vec& g, double scale, int dim);
};

// Accumulates head parameter gradients and (optionally) dL/df from dL/dz.
void head_backward(const DetectorParams& params, const Vec& f, const HeadForward& fwd,
                   const Vec& dz, HeadGrads& grads, Vec* df);

// Scatters dL/dx back into the embedding rows of the contributing buckets.
void encode_backward(const std::vector<std::uint32_t>& buckets, const Vec& dx, Gradients& grads,
                     int dim);

// ---------------------------------------------------------------------------
// Cross-entropy pieces.

double cross_entropy(const Vec& probs, int label);
double cross_entropy_uniform(const Vec& probs);  // target = uniform over classes
Vec ce_logit_gradient(const Vec& probs, int label);
Vec ce_uniform_logit_gradient(const Vec& probs);

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay. Embedding rows are updated lazily: only
// rows with gradient this step touch their moments (and decay).

struct AdamConfig {
    double learning_rate = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

class AdamW {
public:
    explicit AdamW(const DetectorParams& params);

    void step(DetectorParams& params, const Gradients& grads, const AdamConfig& config);
    long step_count() const { return t_; }

    // Serialization hooks for checkpoints.
    const Mat& embedding_m() const { return emb_m_; }
    const Mat& embedding_v() const { return emb_v_; }

private:
    struct Slot {
        Vec m, v;
        void init(std::size_t n) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
        }
    };
    void update_dense(double* p, const double* g, std::size_t n, Slot& slot,
                      const AdamConfig& config, double bc1, double bc2);

    Mat emb_m_, emb_v_;
    Slot w1_, b1_, w2_, b2_, gate_w_, gate_b_, gate_k_;
    long t_ = 0;
};

}  // namespace contiguard
