#pragma once

#include <string>
#include <utility>
#include <vector>

#include "contiguard/config.hpp"
#include "contiguard/corpus.hpp"
#include "contiguard/model.hpp"
#include "contiguard/replay.hpp"
#include "contiguard/train.hpp"

namespace contiguard {

// One perturbation domain with prepared splits.
struct DomainData {
    PerturbationKind kind = PerturbationKind::Insert;
    std::vector<PreparedSample> train, valid, test;
};

struct MomentLog {
    int moment = 0;  // 1-based position in the order
    std::string order_id;
    std::string method;  // "full", "stream", "joint", ablation name
    std::uint64_t seed = 0;
    int memory_k = 0;
    std::vector<std::pair<std::string, double>> per_domain_accuracy;  // seen domains
    double averaged_accuracy = 0.0;
    double wall_seconds = 0.0;
};

struct CriticalFeatureSet {
    std::string domain;
    int moment = 0;
    std::vector<int> indices;  // mask = 0 on a strict majority of test samples
};

struct RunResult {
    std::vector<MomentLog> moments;
    std::vector<CriticalFeatureSet> critical;
    DetectorParams params;
    MemoryBuffer memories;
};

// Splits a dataset by perturbation kind and prepares encodings; auxiliary
// text is fetched through the provider (cached).
std::vector<DomainData> prepare_domains(const std::vector<LabeledText>& dataset,
                                        const std::vector<PerturbationKind>& order,
                                        const ModelConfig& model_config,
                                        AuxiliaryProvider& provider);

// Sequential continual run: trains on each domain in order, evaluates on all
// seen domains after each moment, records critical feature sets.
RunResult run_sequence(const std::vector<DomainData>& domains, const RunConfig& config,
                       const StrategyFlags& flags, const std::string& order_id,
                       const std::string& method_label);

// Joint reference: one training pass over the union of all train splits,
// then per-moment evaluation as if domains arrived in order.
RunResult run_joint(const std::vector<DomainData>& domains, const RunConfig& config,
                    const std::string& order_id);

// |C_then intersect C_now| / |C_then|; empty C_then -> 1.
double retention_rate(const CriticalFeatureSet& then_set, const CriticalFeatureSet& now_set);

// identity, reverse, and two seeded shuffles. Returns (order_id, order).
std::vector<std::pair<std::string, std::vector<PerturbationKind>>> default_orders(
    const std::vector<PerturbationKind>& kinds, std::uint64_t seed);

struct SweepPoint {
    int k = 0;
    std::vector<MomentLog> moments;
};

std::vector<SweepPoint> sweep_memory(const std::vector<DomainData>& domains,
                                     const RunConfig& config, const std::vector<int>& k_values,
                                     const std::string& order_id);

// ---------------------------------------------------------------------------
// Results I/O and report tables.

void write_moment_logs(const std::string& path, const std::vector<MomentLog>& logs);
std::vector<MomentLog> read_moment_logs(const std::string& path);
void write_critical_sets(const std::string& path, const std::vector<CriticalFeatureSet>& sets);
std::vector<CriticalFeatureSet> read_critical_sets(const std::string& path);

// Moments-by-method table (T_i averaged over orders and seeds, plus final
// moment per order), CSV and Markdown.
std::string moments_table_csv(const std::vector<MomentLog>& logs);
std::string moments_table_markdown(const std::vector<MomentLog>& logs);

// Retention matrix (domains x moments) for one run's critical sets.
std::string retention_matrix_csv(const std::vector<CriticalFeatureSet>& sets);
std::string retention_matrix_markdown(const std::vector<CriticalFeatureSet>& sets);

}  // namespace contiguard
