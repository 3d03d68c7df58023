#include "contiguard/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "contiguard/errors.hpp"

namespace contiguard {

namespace {
const std::vector<std::string> kAblationNames = {"wo_aux",  "wo_coop", "wo_disc", "wo_more",
                                                 "wo_less", "wo_mem",  "wo_align"};
}

std::optional<StrategyFlags> StrategyFlags::ablation(const std::string& name) {
    StrategyFlags f;
    if (name == "wo_aux") {
        f.aux = false;
        f.coop = false;
    } else if (name == "wo_coop") {
        f.coop = false;
    } else if (name == "wo_disc") {
        f.more = false;
        f.less = false;
    } else if (name == "wo_more") {
        f.more = false;
    } else if (name == "wo_less") {
        f.less = false;
    } else if (name == "wo_mem") {
        f.mem = false;
        f.align = false;  // no memories, nothing to align
    } else if (name == "wo_align") {
        f.align = false;
    } else {
        return std::nullopt;
    }
    return f;
}

const std::vector<std::string>& StrategyFlags::ablation_names() { return kAblationNames; }

std::string StrategyFlags::label() const {
    StrategyFlags full;
    if (aux == full.aux && coop == full.coop && more == full.more && less == full.less &&
        mem == full.mem && align == full.align) {
        return "full";
    }
    if (!aux && !coop && !more && !less && !mem && !align) return "stream";
    for (const auto& name : kAblationNames) {
        auto f = ablation(name);
        if (f && f->aux == aux && f->coop == coop && f->more == more && f->less == less &&
            f->mem == mem && f->align == align) {
            return name;
        }
    }
    std::ostringstream out;
    out << "custom(aux=" << aux << ",coop=" << coop << ",more=" << more << ",less=" << less
        << ",mem=" << mem << ",align=" << align << ")";
    return out.str();
}

// ---------------------------------------------------------------------------

FeatureForward feature_forward(const DetectorParams& params, const PreparedSample& sample,
                               const StrategyFlags& flags, double alpha) {
    FeatureForward fwd;
    fwd.x_p = encode_from_buckets(sample.text_buckets, params.embedding);
    if (!flags.aux || sample.aux_buckets.empty()) {
        fwd.path = FeatureForward::Path::PlainOnly;
        fwd.f = fwd.x_p;
        return fwd;
    }
    fwd.x_a = encode_from_buckets(sample.aux_buckets, params.embedding);
    if (!flags.coop) {
        fwd.path = FeatureForward::Path::FixedMix;
        fwd.alpha = alpha;
        fwd.f.resize(fwd.x_p.size());
        for (std::size_t k = 0; k < fwd.f.size(); ++k) {
            fwd.f[k] = alpha * fwd.x_p[k] + (1.0 - alpha) * fwd.x_a[k];
        }
        return fwd;
    }
    fwd.path = FeatureForward::Path::Gated;
    fwd.gate = gate_forward(fwd.x_p, fwd.x_a, params.gate);
    fwd.f = cooperate(fwd.x_p, fwd.x_a, fwd.gate.w);
    return fwd;
}

void feature_backward(const DetectorParams& params, const PreparedSample& sample,
                      const FeatureForward& fwd, const Vec& df, Gradients& grads) {
    const int dim = params.config.dim;
    switch (fwd.path) {
        case FeatureForward::Path::PlainOnly: {
            encode_backward(sample.text_buckets, df, grads, dim);
            return;
        }
        case FeatureForward::Path::FixedMix: {
            Vec dxp(df.size()), dxa(df.size());
            for (std::size_t k = 0; k < df.size(); ++k) {
                dxp[k] = fwd.alpha * df[k];
                dxa[k] = (1.0 - fwd.alpha) * df[k];
            }
            encode_backward(sample.text_buckets, dxp, grads, dim);
            encode_backward(sample.aux_buckets, dxa, grads, dim);
            return;
        }
        case FeatureForward::Path::Gated: {
            Vec dxp(df.size(), 0.0), dxa(df.size(), 0.0), dw(df.size(), 0.0);
            cooperate_backward(fwd.x_p, fwd.x_a, fwd.gate.w, df, dxp, dxa, dw);
            gate_backward(fwd.gate, params.gate, dw, grads.gate, dxp, dxa);
            encode_backward(sample.text_buckets, dxp, grads, dim);
            encode_backward(sample.aux_buckets, dxa, grads, dim);
            return;
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<Mask> compute_batch_masks(const std::vector<const PreparedSample*>& batch,
                                      const DetectorParams& params, const StrategyFlags& flags,
                                      const TrainSettings& settings) {
    std::vector<Mask> masks;
    masks.reserve(batch.size());
    for (const auto* s : batch) {
        FeatureForward fwd = feature_forward(params, *s, flags, settings.coop_alpha);
        masks.push_back(compute_mask(fwd.f, params, settings.ig_steps));
    }
    return masks;
}

BatchLoss batch_loss_and_gradients(const std::vector<const PreparedSample*>& batch,
                                   const std::vector<Mask>* masks, const DetectorParams& params,
                                   const TrainSettings& settings, TermFlags terms,
                                   const StrategyFlags& flags, const MemoryBuffer* memories) {
    // Zero-weighted terms are skipped outright so a lambda = 0 or gamma = 0
    // run follows the plain-CE parameter trajectory bitwise (no spurious
    // lazy-decay touches on embedding rows).
    if (settings.weights.lambda == 0.0) {
        terms.more = false;
        terms.less = false;
    }
    if (settings.weights.gamma == 0.0) terms.align = false;

    BatchLoss out;
    out.grads.init_like(params);
    LossReport& report = out.report;
    report.cls_active = terms.cls;
    report.more_active = terms.more;
    report.less_active = terms.less;
    report.align_active = terms.align && memories != nullptr && !memories->empty();

    const std::size_t b = batch.size();
    const double inv_b = b > 0 ? 1.0 / static_cast<double>(b) : 0.0;
    const double lambda = settings.weights.lambda;
    const std::size_t d = static_cast<std::size_t>(params.config.dim);

    std::vector<Mask> local_masks;
    if (terms.less && masks == nullptr) {
        local_masks = compute_batch_masks(batch, params, flags, settings);
        masks = &local_masks;
    }

    for (std::size_t i = 0; i < b; ++i) {
        const PreparedSample& s = *batch[i];
        FeatureForward fwd = feature_forward(params, s, flags, settings.coop_alpha);
        Vec df(d, 0.0);

        if (terms.cls) {
            HeadForward h = head_forward(params, fwd.f);
            report.cls += cross_entropy(h.p, s.label) * inv_b;
            Vec dz = ce_logit_gradient(h.p, s.label);
            for (double& v : dz) v *= inv_b;
            head_backward(params, fwd.f, h, dz, out.grads.head, &df);
        }
        if (terms.more) {
            Vec neg(d);
            for (std::size_t k = 0; k < d; ++k) neg[k] = -fwd.f[k];
            HeadForward h = head_forward(params, neg);
            report.more += cross_entropy(h.p, s.label) * inv_b;
            Vec dz = ce_logit_gradient(h.p, s.label);
            for (double& v : dz) v *= lambda * inv_b;
            Vec dneg(d, 0.0);
            head_backward(params, neg, h, dz, out.grads.head, &dneg);
            for (std::size_t k = 0; k < d; ++k) df[k] -= dneg[k];
        }
        if (terms.less) {
            const Mask& mask = (*masks)[i];
            Vec fm(d);
            for (std::size_t k = 0; k < d; ++k) fm[k] = mask[k] ? fwd.f[k] : 0.0;
            HeadForward h = head_forward(params, fm);
            report.less += cross_entropy_uniform(h.p) * inv_b;
            Vec dz = ce_uniform_logit_gradient(h.p);
            for (double& v : dz) v *= lambda * inv_b;
            Vec dfm(d, 0.0);
            head_backward(params, fm, h, dz, out.grads.head, &dfm);
            for (std::size_t k = 0; k < d; ++k) {
                if (mask[k]) df[k] += dfm[k];
            }
        }
        feature_backward(params, s, fwd, df, out.grads);
    }

    if (report.align_active) {
        std::vector<std::vector<const MemoryEntry*>> per_domain;
        std::vector<std::vector<Vec>> f_cur;
        std::vector<std::vector<FeatureForward>> fwds;
        for (const auto& [_, entries] : memories->domains) {
            per_domain.emplace_back();
            f_cur.emplace_back();
            fwds.emplace_back();
            for (const auto& e : entries) {
                per_domain.back().push_back(&e);
                fwds.back().push_back(feature_forward(params, e.sample, flags, settings.coop_alpha));
                f_cur.back().push_back(fwds.back().back().f);
            }
        }
        AlignForward af = align_forward(per_domain, f_cur);
        report.align = af.loss;
        auto dcos = align_cos_gradients(af);
        const double gamma = settings.weights.gamma;
        for (std::size_t i = 0; i < per_domain.size(); ++i) {
            for (std::size_t j = 0; j < per_domain[i].size(); ++j) {
                Vec df(d, 0.0);
                cosine_backward(per_domain[i][j]->f_old, f_cur[i][j], af.cosines[i][j],
                                gamma * dcos[i][j], df);
                feature_backward(params, per_domain[i][j]->sample, fwds[i][j], df, out.grads);
            }
        }
    }

    total_loss(report, settings.weights);
    return out;
}

LossReport train_step(const std::vector<const PreparedSample*>& batch, const std::vector<Mask>* masks,
                      DetectorParams& params, AdamW& opt, const TrainSettings& settings,
                      TermFlags terms, const StrategyFlags& flags, const MemoryBuffer* memories) {
    BatchLoss bl = batch_loss_and_gradients(batch, masks, params, settings, terms, flags, memories);
    if (!std::isfinite(bl.report.total)) {
        std::ostringstream msg;
        msg << "non-finite total loss (cls=" << bl.report.cls << " more=" << bl.report.more
            << " less=" << bl.report.less << " align=" << bl.report.align << ")";
        throw TrainingError(msg.str());
    }
    opt.step(params, bl.grads, settings.adam);
    return bl.report;
}

void relearn_cycle(const std::vector<const PreparedSample*>& batch, DetectorParams& params,
                   AdamW& opt, const TrainSettings& settings, const StrategyFlags& flags,
                   int cycles) {
    if (cycles <= 0 || batch.empty()) return;
    // Masks come from the batch-start snapshot and are reused across cycles.
    std::vector<Mask> masks = compute_batch_masks(batch, params, flags, settings);
    TermFlags unlearn;
    unlearn.less = true;
    TermFlags relearn;
    relearn.cls = true;
    for (int r = 0; r < cycles; ++r) {
        train_step(batch, &masks, params, opt, settings, unlearn, flags, nullptr);
        train_step(batch, nullptr, params, opt, settings, relearn, flags, nullptr);
    }
}

double evaluate_accuracy(const std::vector<PreparedSample>& samples, const DetectorParams& params,
                         const StrategyFlags& flags, double alpha) {
    if (samples.empty()) throw DataError("evaluate_accuracy: empty split");
    std::size_t correct = 0;
    for (const auto& s : samples) {
        FeatureForward fwd = feature_forward(params, s, flags, alpha);
        Vec p = classify(params, fwd.f);
        int pred = p[1] > p[0] ? 1 : 0;
        if (pred == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace contiguard
