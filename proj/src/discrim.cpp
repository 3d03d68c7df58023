#include "contiguard/discrim.hpp"

#include "contiguard/errors.hpp"

namespace contiguard {

Vec integrated_gradients(const Vec& f, const Vec& baseline, int steps,
                         const std::function<Vec(const Vec&)>& grad_at) {
    if (steps < 1) throw ConfigError("integrated_gradients: steps must be >= 1");
    if (f.size() != baseline.size()) throw DataError("integrated_gradients: baseline dimension mismatch");
    const std::size_t d = f.size();
    Vec avg(d, 0.0);
    Vec point(d);
    for (int s = 0; s < steps; ++s) {
        const double beta = (static_cast<double>(s) + 0.5) / static_cast<double>(steps);
        for (std::size_t k = 0; k < d; ++k) point[k] = baseline[k] + beta * (f[k] - baseline[k]);
        Vec g = grad_at(point);
        for (std::size_t k = 0; k < d; ++k) avg[k] += g[k];
    }
    Vec attribution(d);
    for (std::size_t k = 0; k < d; ++k) {
        attribution[k] = (f[k] - baseline[k]) * avg[k] / static_cast<double>(steps);
    }
    return attribution;
}

Vec integrated_gradients(const Vec& f, const DetectorParams& params, int y, const Vec& baseline,
                         int steps) {
    return integrated_gradients(f, baseline, steps,
                                [&](const Vec& point) { return head_feature_gradient(params, point, y); });
}

AttributionVector attribute(const Vec& f, const DetectorParams& params, const Vec& baseline,
                            int steps) {
    AttributionVector a;
    a.baseline = baseline;
    a.steps = steps;
    a.toward_nontoxic = integrated_gradients(f, params, 0, baseline, steps);
    a.toward_toxic = integrated_gradients(f, params, 1, baseline, steps);
    return a;
}

Mask less_discriminative_mask(const Vec& a0, const Vec& a1) {
    if (a0.size() != a1.size()) throw DataError("less_discriminative_mask: dimension mismatch");
    Mask m(a0.size(), 0);
    for (std::size_t k = 0; k < a0.size(); ++k) {
        m[k] = (a0[k] * a1[k] > 0.0) ? 1 : 0;
    }
    return m;
}

Mask compute_mask(const Vec& f, const DetectorParams& params, int steps) {
    Vec baseline(f.size(), 0.0);
    auto a = attribute(f, params, baseline, steps);
    return less_discriminative_mask(a.toward_nontoxic, a.toward_toxic);
}

double loss_more(const DetectorParams& params, const Vec& f, int label) {
    Vec neg(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) neg[k] = -f[k];
    return cross_entropy(classify(params, neg), label);
}

double loss_less(const DetectorParams& params, const Vec& f, const Mask& mask) {
    if (f.size() != mask.size()) throw DataError("loss_less: mask dimension mismatch");
    Vec masked(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) masked[k] = mask[k] ? f[k] : 0.0;
    return cross_entropy_uniform(classify(params, masked));
}

}  // namespace contiguard
