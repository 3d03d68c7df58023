#include "contiguard/replay.hpp"

#include <algorithm>
#include <cmath>

#include "contiguard/errors.hpp"

namespace contiguard {

void MemoryBuffer::add_domain(const std::string& domain, std::vector<MemoryEntry> entries) {
    if (static_cast<int>(entries.size()) > capacity_per_domain) {
        entries.resize(static_cast<std::size_t>(capacity_per_domain));
    }
    domains.emplace_back(domain, std::move(entries));
}

std::size_t MemoryBuffer::total() const {
    std::size_t n = 0;
    for (const auto& [_, entries] : domains) n += entries.size();
    return n;
}

bool MemoryBuffer::empty() const { return total() == 0; }

const std::vector<MemoryEntry>* MemoryBuffer::find(const std::string& domain) const {
    for (const auto& [name, entries] : domains) {
        if (name == domain) return &entries;
    }
    return nullptr;
}

std::vector<std::size_t> select_memory_indices(const std::vector<int>& labels,
                                               const std::vector<Vec>& features, int k) {
    if (labels.size() != features.size()) throw DataError("select_memory_indices: size mismatch");
    if (k <= 0 || labels.empty()) return {};
    if (static_cast<std::size_t>(k) >= labels.size()) {
        std::vector<std::size_t> all(labels.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }

    const std::size_t d = features[0].size();
    std::vector<std::vector<std::size_t>> by_class(2);
    Vec centroid[2] = {Vec(d, 0.0), Vec(d, 0.0)};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int c = labels[i] == 1 ? 1 : 0;
        by_class[static_cast<std::size_t>(c)].push_back(i);
        axpy(1.0, features[i], centroid[c]);
    }
    for (int c = 0; c < 2; ++c) {
        if (!by_class[static_cast<std::size_t>(c)].empty()) {
            for (double& v : centroid[c]) v /= static_cast<double>(by_class[static_cast<std::size_t>(c)].size());
        }
    }
    // Rank each class by cosine to its centroid, descending; index breaks ties.
    for (int c = 0; c < 2; ++c) {
        auto& idx = by_class[static_cast<std::size_t>(c)];
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            double ca = cosine(features[a], centroid[c]);
            double cb = cosine(features[b], centroid[c]);
            if (ca != cb) return ca > cb;
            return a < b;
        });
    }
    std::size_t want0 = static_cast<std::size_t>(k) / 2;
    std::size_t want1 = static_cast<std::size_t>(k) - want0;
    std::size_t take0 = std::min(want0, by_class[0].size());
    std::size_t take1 = std::min(want1, by_class[1].size());
    // Backfill from the other class when one side runs short.
    std::size_t spare = static_cast<std::size_t>(k) - take0 - take1;
    if (spare > 0) {
        std::size_t extra1 = std::min(spare, by_class[1].size() - take1);
        take1 += extra1;
        spare -= extra1;
        take0 += std::min(spare, by_class[0].size() - take0);
    }
    std::vector<std::size_t> out;
    out.reserve(take0 + take1);
    for (std::size_t i = 0; i < take0; ++i) out.push_back(by_class[0][i]);
    for (std::size_t i = 0; i < take1; ++i) out.push_back(by_class[1][i]);
    std::sort(out.begin(), out.end());
    return out;
}

AlignForward align_forward(const std::vector<std::vector<const MemoryEntry*>>& per_domain,
                           const std::vector<std::vector<Vec>>& f_cur) {
    AlignForward fwd;
    std::size_t active_domains = 0;
    for (const auto& entries : per_domain) {
        if (!entries.empty()) ++active_domains;
    }
    if (active_domains == 0) return fwd;

    double sum_over_domains = 0.0;
    for (std::size_t i = 0; i < per_domain.size(); ++i) {
        const auto& entries = per_domain[i];
        fwd.cosines.emplace_back();
        fwd.softmaxes.emplace_back();
        if (entries.empty()) continue;
        auto& cos_i = fwd.cosines.back();
        cos_i.reserve(entries.size());
        double max_cos = -1e30;
        for (std::size_t j = 0; j < entries.size(); ++j) {
            double c = cosine(entries[j]->f_old, f_cur[i][j]);
            cos_i.push_back(c);
            max_cos = std::max(max_cos, c);
        }
        double sum_exp = 0.0;
        for (double c : cos_i) sum_exp += std::exp(c - max_cos);
        const double z = -(max_cos + std::log(sum_exp));  // Z_i = -log sum exp(cos)
        double mean_cos = 0.0;
        for (double c : cos_i) mean_cos += c;
        mean_cos /= static_cast<double>(cos_i.size());
        sum_over_domains += mean_cos + z;

        auto& sm = fwd.softmaxes.back();
        sm.reserve(cos_i.size());
        for (double c : cos_i) sm.push_back(std::exp(c - max_cos) / sum_exp);
    }
    fwd.loss = -sum_over_domains / static_cast<double>(active_domains);
    return fwd;
}

std::vector<std::vector<double>> align_cos_gradients(const AlignForward& fwd) {
    std::vector<std::vector<double>> out;
    std::size_t active_domains = 0;
    for (const auto& cos_i : fwd.cosines) {
        if (!cos_i.empty()) ++active_domains;
    }
    for (std::size_t i = 0; i < fwd.cosines.size(); ++i) {
        out.emplace_back(fwd.cosines[i].size(), 0.0);
        if (fwd.cosines[i].empty()) continue;
        const double n_i = static_cast<double>(fwd.cosines[i].size());
        for (std::size_t j = 0; j < fwd.cosines[i].size(); ++j) {
            // d(-1/T (mean_j cos + Z_i))/dcos_j = -(1/T)(1/N_i - softmax_j)
            out[i][j] = -(1.0 / static_cast<double>(active_domains)) *
                        (1.0 / n_i - fwd.softmaxes[i][j]);
        }
    }
    return out;
}

double loss_align(const MemoryBuffer& buffer,
                  const std::function<Vec(const PreparedSample&)>& feature_fn) {
    if (buffer.empty()) return 0.0;
    std::vector<std::vector<const MemoryEntry*>> per_domain;
    std::vector<std::vector<Vec>> f_cur;
    for (const auto& [_, entries] : buffer.domains) {
        per_domain.emplace_back();
        f_cur.emplace_back();
        for (const auto& e : entries) {
            per_domain.back().push_back(&e);
            f_cur.back().push_back(feature_fn(e.sample));
        }
    }
    return align_forward(per_domain, f_cur).loss;
}

void cosine_backward(const Vec& f_old, const Vec& f_cur, double cos_val, double dcos, Vec& df_cur) {
    const double na = norm2(f_old);
    const double nb = norm2(f_cur);
    if (na == 0.0 || nb == 0.0) return;
    const double inv = 1.0 / (na * nb);
    const double nb2 = nb * nb;
    for (std::size_t k = 0; k < f_cur.size(); ++k) {
        df_cur[k] += dcos * (f_old[k] * inv - cos_val * f_cur[k] / nb2);
    }
}

double total_loss(LossReport& report, const LossWeights& weights) {
    auto check = [](double v, const char* name) {
        if (!std::isfinite(v)) throw TrainingError(std::string("non-finite loss term: ") + name);
        return v;
    };
    double total = 0.0;
    if (report.cls_active) total += check(report.cls, "cls");
    if (report.more_active) total += weights.lambda * check(report.more, "more");
    if (report.less_active) total += weights.lambda * check(report.less, "less");
    if (report.align_active) total += weights.gamma * check(report.align, "align");
    report.total = total;
    return total;
}

}  // namespace contiguard
