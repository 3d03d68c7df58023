#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "contiguard/model.hpp"

namespace contiguard {

// Eq.-13 scale factors.
struct LossWeights {
    double lambda = 0.1;  // discriminability terms
    double gamma = 1.0;   // alignment term
};

// A stored memory sample: its prepared encoding plus the feature snapshot
// frozen at selection time.
struct MemoryEntry {
    PreparedSample sample;
    Vec f_old;
};

// Append-only per-domain store; at most capacity_per_domain entries each.
struct MemoryBuffer {
    int capacity_per_domain = 8;
    std::vector<std::pair<std::string, std::vector<MemoryEntry>>> domains;

    void add_domain(const std::string& domain, std::vector<MemoryEntry> entries);
    std::size_t total() const;
    bool empty() const;
    const std::vector<MemoryEntry>* find(const std::string& domain) const;
};

// Class-balanced nearest-to-centroid (cosine) selection. Returns indices
// into labels/features, at most k, all when k exceeds the domain size.
std::vector<std::size_t> select_memory_indices(const std::vector<int>& labels,
                                               const std::vector<Vec>& features, int k);

// ---------------------------------------------------------------------------
// Feature alignment (cosine + log-sum-exp normalization per domain).

struct AlignForward {
    double loss = 0.0;
    std::vector<std::vector<double>> cosines;    // [domain][entry]
    std::vector<std::vector<double>> softmaxes;  // [domain][entry], exp(cos)/sum
};

// per_domain[i][j] pairs f_old of entry j with f_cur[i][j].
AlignForward align_forward(const std::vector<std::vector<const MemoryEntry*>>& per_domain,
                           const std::vector<std::vector<Vec>>& f_cur);

// dLoss/dcos for every [domain][entry] of a forward pass.
std::vector<std::vector<double>> align_cos_gradients(const AlignForward& fwd);

// Convenience scalar form: feature_fn maps a stored sample to its current
// feature. Returns 0 when the buffer is empty (term inactive).
double loss_align(const MemoryBuffer& buffer,
                  const std::function<Vec(const PreparedSample&)>& feature_fn);

// d cos(f_old, f_cur) / d f_cur accumulated into df_cur with upstream dcos.
// Zero-norm vectors have zero gradient (cosine defined as 0 there).
void cosine_backward(const Vec& f_old, const Vec& f_cur, double cos_val, double dcos, Vec& df_cur);

// ---------------------------------------------------------------------------
// Total-loss assembly (weighted sum with itemization).

struct LossReport {
    double cls = 0.0, more = 0.0, less = 0.0, align = 0.0;
    bool cls_active = false, more_active = false, less_active = false, align_active = false;
    double total = 0.0;
};

// total = cls + lambda*(more + less) + gamma*align over the active terms;
// inactive terms contribute exactly 0. Throws TrainingError naming the term
// when any active value is non-finite.
double total_loss(LossReport& report, const LossWeights& weights);

}  // namespace contiguard
