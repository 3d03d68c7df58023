#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "contiguard/model.hpp"

namespace contiguard {

// Per-class feature attributions. F_y is the pre-softmax logit of class y:
// softmax couples the classes and would blur the sign-product test.
struct AttributionVector {
    Vec toward_nontoxic;  // A_{y=0}
    Vec toward_toxic;     // A_{y=1}
    Vec baseline;
    int steps = 20;
};

// Midpoint-rule integrated gradients along the straight line from baseline
// to f. grad_at(point) must return dF_y/dfeature at that point.
Vec integrated_gradients(const Vec& f, const Vec& baseline, int steps,
                         const std::function<Vec(const Vec&)>& grad_at);

// Attribution of feature f to the logit of class y under the model head.
Vec integrated_gradients(const Vec& f, const DetectorParams& params, int y, const Vec& baseline,
                         int steps);

AttributionVector attribute(const Vec& f, const DetectorParams& params, const Vec& baseline,
                            int steps);

using Mask = std::vector<std::uint8_t>;

// mask_k = 1 iff A0_k * A1_k > 0 (strictly); a zero product counts as
// discriminative.
Mask less_discriminative_mask(const Vec& a0, const Vec& a1);

// Mask for a feature under the current head, zero baseline.
Mask compute_mask(const Vec& f, const DetectorParams& params, int steps);

// Flipping loss: cross-entropy of the head applied to -f against the true
// label.
double loss_more(const DetectorParams& params, const Vec& f, int label);

// Unlearning loss: cross-entropy between the head output on the masked
// feature and the uniform distribution. Bounded below by log 2.
double loss_less(const DetectorParams& params, const Vec& f, const Mask& mask);

}  // namespace contiguard
