#pragma once

#include <optional>
#include <string>
#include <vector>

#include "contiguard/discrim.hpp"
#include "contiguard/model.hpp"
#include "contiguard/replay.hpp"

namespace contiguard {

// One switch per strategy component; ablation variants toggle exactly one.
struct StrategyFlags {
    bool aux = true;    // auxiliary information
    bool coop = true;   // dynamical cooperation gate (fixed mix when off)
    bool more = true;   // flipping loss
    bool less = true;   // unlearn/relearn cycles
    bool mem = true;    // memory samples mixed into batches
    bool align = true;  // feature alignment loss

    static StrategyFlags full() { return {}; }
    static StrategyFlags stream() { return {false, false, false, false, false, false}; }
    static std::optional<StrategyFlags> ablation(const std::string& name);
    static const std::vector<std::string>& ablation_names();
    std::string label() const;
};

// Which loss terms one optimizer update covers.
struct TermFlags {
    bool cls = false;
    bool more = false;
    bool less = false;
    bool align = false;
};

struct TrainSettings {
    AdamConfig adam;
    LossWeights weights;
    double coop_alpha = 0.5;     // fixed mix weight on x_p when coop is off
    int ig_steps = 20;
    int relearn_cycles = 3;      // R
    int batch_size = 16;
    int memory_fresh_ratio = 4;  // 1 memory sample per this many fresh
    int max_epochs = 20;
    int patience = 5;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Feature pipeline: encoded text, optionally fused with encoded auxiliary
// text through the fixed mix or the cooperation gate.

struct FeatureForward {
    enum class Path { PlainOnly, FixedMix, Gated };
    Path path = Path::PlainOnly;
    Vec x_p;
    Vec x_a;
    GateForward gate;
    Vec f;
    double alpha = 0.5;  // fixed-mix weight actually used
};

FeatureForward feature_forward(const DetectorParams& params, const PreparedSample& sample,
                               const StrategyFlags& flags, double alpha);

void feature_backward(const DetectorParams& params, const PreparedSample& sample,
                      const FeatureForward& fwd, const Vec& df, Gradients& grads);

// ---------------------------------------------------------------------------

struct BatchLoss {
    LossReport report;
    Gradients grads;
};

// Loss + gradients of the weighted sum of active terms over the batch
// (per-sample terms are batch means; align runs over the whole buffer).
// masks, when null and less is active, are computed from the current params.
BatchLoss batch_loss_and_gradients(const std::vector<const PreparedSample*>& batch,
                                   const std::vector<Mask>* masks, const DetectorParams& params,
                                   const TrainSettings& settings, TermFlags terms,
                                   const StrategyFlags& flags, const MemoryBuffer* memories);

// One AdamW update on the total loss; throws TrainingError on non-finite loss.
LossReport train_step(const std::vector<const PreparedSample*>& batch, const std::vector<Mask>* masks,
                      DetectorParams& params, AdamW& opt, const TrainSettings& settings,
                      TermFlags terms, const StrategyFlags& flags, const MemoryBuffer* memories);

// Discriminability masks for every sample of a batch (frozen params).
std::vector<Mask> compute_batch_masks(const std::vector<const PreparedSample*>& batch,
                                      const DetectorParams& params, const StrategyFlags& flags,
                                      const TrainSettings& settings);

// Alternates an unlearning update (uniform-target loss on masked features)
// with a standard classification update, `cycles` times per batch. cycles = 0
// disables the mechanism entirely.
void relearn_cycle(const std::vector<const PreparedSample*>& batch, DetectorParams& params,
                   AdamW& opt, const TrainSettings& settings, const StrategyFlags& flags,
                   int cycles);

// Fraction of correct argmax predictions. Empty input is an error.
double evaluate_accuracy(const std::vector<PreparedSample>& samples, const DetectorParams& params,
                         const StrategyFlags& flags, double alpha);

}  // namespace contiguard
