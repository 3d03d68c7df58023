#include "contiguard/model.hpp"

#include <cmath>

#include "contiguard/errors.hpp"
#include "contiguard/rng.hpp"
#include "contiguard/text.hpp"

namespace contiguard {

DetectorParams DetectorParams::init(const ModelConfig& config, std::uint64_t seed) {
    DetectorParams p;
    p.config = config;
    Rng rng = make_rng(seed);
    p.embedding = Mat(config.buckets, config.dim);
    for (double& v : p.embedding.data) v = 0.1 * rand_normal(rng);
    p.head_hidden_w = Mat(config.dim, config.hidden);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(config.dim));
    for (double& v : p.head_hidden_w.data) v = s1 * rand_normal(rng);
    p.head_hidden_b.assign(config.hidden, 0.0);
    p.head_out_w = Mat(config.hidden, 2);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(config.hidden));
    for (double& v : p.head_out_w.data) v = s2 * rand_normal(rng);
    p.head_out_b.assign(2, 0.0);
    p.gate = GateParams::init(config.dim, mix_seed(seed, 17), config.gate_diagonal);
    return p;
}

std::vector<std::uint32_t> encode_buckets(const std::string& text, const ModelConfig& config) {
    std::string norm = normalize_text(text, static_cast<std::size_t>(config.max_chars));
    auto cps = utf8_decode(norm);
    std::vector<std::uint32_t> buckets;
    if (cps.empty()) return buckets;

    auto hash_window = [](const char32_t* w, std::size_t n) {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ (0x9e3779b9ULL * n);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t cp = static_cast<std::uint32_t>(w[i]);
            for (int b = 0; b < 4; ++b) {
                h ^= (cp >> (8 * b)) & 0xFF;
                h *= 0x100000001b3ULL;
            }
        }
        return h;
    };

    const std::uint32_t mod = static_cast<std::uint32_t>(config.buckets);
    bool any = false;
    for (std::size_t n = 3; n <= 5; ++n) {
        if (cps.size() < n) continue;
        any = true;
        for (std::size_t i = 0; i + n <= cps.size(); ++i) {
            buckets.push_back(static_cast<std::uint32_t>(hash_window(cps.data() + i, n) % mod));
        }
    }
    if (!any) {
        // Shorter than the smallest n-gram: hash the whole text once.
        buckets.push_back(static_cast<std::uint32_t>(hash_window(cps.data(), cps.size()) % mod));
    }
    return buckets;
}

FeatureVector encode_from_buckets(const std::vector<std::uint32_t>& buckets, const Mat& embedding) {
    Vec x(static_cast<std::size_t>(embedding.cols), 0.0);
    if (buckets.empty()) return x;
    for (std::uint32_t b : buckets) {
        const double* row = embedding.row(static_cast<int>(b));
        for (int k = 0; k < embedding.cols; ++k) x[static_cast<std::size_t>(k)] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(buckets.size());
    for (double& v : x) v *= inv;
    return x;
}

FeatureVector encode(const std::string& text, const DetectorParams& params) {
    return encode_from_buckets(encode_buckets(text, params.config), params.embedding);
}

PreparedSample prepare_sample(const std::string& id, const std::string& text, int label,
                              const std::string& domain, const std::string& aux_text,
                              const ModelConfig& config) {
    PreparedSample s;
    s.id = id;
    s.label = label;
    s.domain = domain;
    s.text_buckets = encode_buckets(text, config);
    if (!aux_text.empty()) s.aux_buckets = encode_buckets(aux_text, config);
    return s;
}

// ---------------------------------------------------------------------------

HeadForward head_forward(const DetectorParams& params, const Vec& f) {
    const int d = params.config.dim;
    const int h = params.config.hidden;
    HeadForward fwd;
    fwd.a1.assign(static_cast<std::size_t>(h), 0.0);
    for (int i = 0; i < d; ++i) {
        const double fi = f[static_cast<std::size_t>(i)];
        const double* wrow = params.head_hidden_w.row(i);
        for (int j = 0; j < h; ++j) fwd.a1[static_cast<std::size_t>(j)] += wrow[j] * fi;
    }
    fwd.t.resize(static_cast<std::size_t>(h));
    for (int j = 0; j < h; ++j) {
        fwd.a1[static_cast<std::size_t>(j)] += params.head_hidden_b[static_cast<std::size_t>(j)];
        fwd.t[static_cast<std::size_t>(j)] = std::tanh(fwd.a1[static_cast<std::size_t>(j)]);
    }
    fwd.z.assign(2, 0.0);
    for (int j = 0; j < h; ++j) {
        const double tj = fwd.t[static_cast<std::size_t>(j)];
        const double* wrow = params.head_out_w.row(j);
        fwd.z[0] += wrow[0] * tj;
        fwd.z[1] += wrow[1] * tj;
    }
    fwd.z[0] += params.head_out_b[0];
    fwd.z[1] += params.head_out_b[1];
    fwd.p = softmax(fwd.z);
    return fwd;
}

Vec head_logits(const DetectorParams& params, const Vec& f) { return head_forward(params, f).z; }

Vec classify(const DetectorParams& params, const FeatureVector& feature) {
    if (static_cast<int>(feature.size()) != params.config.dim) {
        throw DataError("classify: feature dimension mismatch");
    }
    return head_forward(params, feature).p;
}

Vec head_feature_gradient(const DetectorParams& params, const Vec& f, int y) {
    HeadForward fwd = head_forward(params, f);
    const int d = params.config.dim;
    const int h = params.config.hidden;
    Vec da1(static_cast<std::size_t>(h));
    for (int j = 0; j < h; ++j) {
        const double tj = fwd.t[static_cast<std::size_t>(j)];
        da1[static_cast<std::size_t>(j)] = (1.0 - tj * tj) * params.head_out_w.at(j, y);
    }
    Vec g(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        const double* wrow = params.head_hidden_w.row(i);
        double acc = 0.0;
        for (int j = 0; j < h; ++j) acc += wrow[j] * da1[static_cast<std::size_t>(j)];
        g[static_cast<std::size_t>(i)] = acc;
    }
    return g;
}

void Gradients::init_like(const DetectorParams& params) {
    head.hidden_w = Mat(params.head_hidden_w.rows, params.head_hidden_w.cols);
    head.hidden_b.assign(params.head_hidden_b.size(), 0.0);
    head.out_w = Mat(params.head_out_w.rows, params.head_out_w.cols);
    head.out_b.assign(params.head_out_b.size(), 0.0);
    gate.init_like(params.gate);
    embedding.clear();
}

void Gradients::add_embedding_row(std::uint32_t row, const Vec& g, double scale, int dim) {
    auto it = embedding.find(row);
    if (it == embedding.end()) {
        it = embedding.emplace(row, Vec(static_cast<std::size_t>(dim), 0.0)).first;
    }
    for (int k = 0; k < dim; ++k) it->second[static_cast<std::size_t>(k)] += scale * g[static_cast<std::size_t>(k)];
}

void head_backward(const DetectorParams& params, const Vec& f, const HeadForward& fwd,
                   const Vec& dz, HeadGrads& grads, Vec* df) {
    const int d = params.config.dim;
    const int h = params.config.hidden;
    Vec dt(static_cast<std::size_t>(h), 0.0);
    for (int j = 0; j < h; ++j) {
        const double tj = fwd.t[static_cast<std::size_t>(j)];
        double* growj = grads.out_w.row(j);
        const double* wrow = params.head_out_w.row(j);
        growj[0] += tj * dz[0];
        growj[1] += tj * dz[1];
        dt[static_cast<std::size_t>(j)] = wrow[0] * dz[0] + wrow[1] * dz[1];
    }
    grads.out_b[0] += dz[0];
    grads.out_b[1] += dz[1];

    Vec da1(static_cast<std::size_t>(h));
    for (int j = 0; j < h; ++j) {
        const double tj = fwd.t[static_cast<std::size_t>(j)];
        da1[static_cast<std::size_t>(j)] = (1.0 - tj * tj) * dt[static_cast<std::size_t>(j)];
        grads.hidden_b[static_cast<std::size_t>(j)] += da1[static_cast<std::size_t>(j)];
    }
    for (int i = 0; i < d; ++i) {
        const double fi = f[static_cast<std::size_t>(i)];
        double* growi = grads.hidden_w.row(i);
        const double* wrow = params.head_hidden_w.row(i);
        double acc = 0.0;
        for (int j = 0; j < h; ++j) {
            growi[j] += fi * da1[static_cast<std::size_t>(j)];
            acc += wrow[j] * da1[static_cast<std::size_t>(j)];
        }
        if (df) (*df)[static_cast<std::size_t>(i)] += acc;
    }
}

void encode_backward(const std::vector<std::uint32_t>& buckets, const Vec& dx, Gradients& grads,
                     int dim) {
    if (buckets.empty()) return;
    const double inv = 1.0 / static_cast<double>(buckets.size());
    for (std::uint32_t b : buckets) grads.add_embedding_row(b, dx, inv, dim);
}

// ---------------------------------------------------------------------------

double cross_entropy(const Vec& probs, int label) {
    return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));
}

double cross_entropy_uniform(const Vec& probs) {
    double loss = 0.0;
    const double u = 1.0 / static_cast<double>(probs.size());
    for (double p : probs) loss -= u * std::log(std::max(p, 1e-300));
    return loss;
}

Vec ce_logit_gradient(const Vec& probs, int label) {
    Vec g = probs;
    g[static_cast<std::size_t>(label)] -= 1.0;
    return g;
}

Vec ce_uniform_logit_gradient(const Vec& probs) {
    Vec g = probs;
    const double u = 1.0 / static_cast<double>(probs.size());
    for (double& v : g) v -= u;
    return g;
}

// ---------------------------------------------------------------------------

AdamW::AdamW(const DetectorParams& params) {
    emb_m_ = Mat(params.embedding.rows, params.embedding.cols);
    emb_v_ = Mat(params.embedding.rows, params.embedding.cols);
    w1_.init(params.head_hidden_w.data.size());
    b1_.init(params.head_hidden_b.size());
    w2_.init(params.head_out_w.data.size());
    b2_.init(params.head_out_b.size());
    gate_w_.init(params.gate.gate_weights.data.size());
    gate_b_.init(params.gate.gate_bias.size());
    gate_k_.init(params.gate.conv_kernel.size());
}

void AdamW::update_dense(double* p, const double* g, std::size_t n, Slot& slot,
                         const AdamConfig& config, double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        slot.m[i] = config.beta1 * slot.m[i] + (1.0 - config.beta1) * g[i];
        slot.v[i] = config.beta2 * slot.v[i] + (1.0 - config.beta2) * g[i] * g[i];
        const double mhat = slot.m[i] / bc1;
        const double vhat = slot.v[i] / bc2;
        p[i] -= config.learning_rate * (mhat / (std::sqrt(vhat) + config.eps) + config.weight_decay * p[i]);
    }
}

void AdamW::step(DetectorParams& params, const Gradients& grads, const AdamConfig& config) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t_));

    update_dense(params.head_hidden_w.data.data(), grads.head.hidden_w.data.data(),
                 params.head_hidden_w.data.size(), w1_, config, bc1, bc2);
    update_dense(params.head_hidden_b.data(), grads.head.hidden_b.data(), params.head_hidden_b.size(),
                 b1_, config, bc1, bc2);
    update_dense(params.head_out_w.data.data(), grads.head.out_w.data.data(),
                 params.head_out_w.data.size(), w2_, config, bc1, bc2);
    update_dense(params.head_out_b.data(), grads.head.out_b.data(), params.head_out_b.size(), b2_,
                 config, bc1, bc2);
    update_dense(params.gate.gate_weights.data.data(), grads.gate.gate_weights.data.data(),
                 params.gate.gate_weights.data.size(), gate_w_, config, bc1, bc2);
    update_dense(params.gate.gate_bias.data(), grads.gate.gate_bias.data(),
                 params.gate.gate_bias.size(), gate_b_, config, bc1, bc2);
    update_dense(params.gate.conv_kernel.data(), grads.gate.conv_kernel.data(),
                 params.gate.conv_kernel.size(), gate_k_, config, bc1, bc2);

    // Lazy rows: only buckets touched this step see moment/decay updates.
    const int dim = params.config.dim;
    for (const auto& [row, g] : grads.embedding) {
        double* p = params.embedding.row(static_cast<int>(row));
        double* m = emb_m_.row(static_cast<int>(row));
        double* v = emb_v_.row(static_cast<int>(row));
        for (int k = 0; k < dim; ++k) {
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[static_cast<std::size_t>(k)];
            v[k] = config.beta2 * v[k] +
                   (1.0 - config.beta2) * g[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(k)];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= config.learning_rate * (mhat / (std::sqrt(vhat) + config.eps) + config.weight_decay * p[k]);
        }
    }
}

}  // namespace contiguard
