#include "contiguard/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "contiguard/errors.hpp"
#include "contiguard/rng.hpp"

namespace contiguard {

using json = nlohmann::json;

std::vector<DomainData> prepare_domains(const std::vector<LabeledText>& dataset,
                                        const std::vector<PerturbationKind>& order,
                                        const ModelConfig& model_config,
                                        AuxiliaryProvider& provider) {
    std::vector<DomainData> out;
    for (PerturbationKind kind : order) {
        DomainData d;
        d.kind = kind;
        const std::string name = to_string(kind);
        for (const auto& s : dataset) {
            if (s.perturbation != name) continue;
            std::string aux_text;
            if (s.aux) {
                aux_text = s.aux->what;
            } else {
                aux_text = provider.fetch(s.id, s.text).what;
            }
            PreparedSample prep = prepare_sample(s.id, s.text, s.label, name, aux_text, model_config);
            if (s.split == "train") {
                d.train.push_back(std::move(prep));
            } else if (s.split == "valid") {
                d.valid.push_back(std::move(prep));
            } else if (s.split == "test") {
                d.test.push_back(std::move(prep));
            }
        }
        if (d.train.empty() || d.valid.empty() || d.test.empty()) {
            throw DataError("domain " + name + " is missing train/valid/test data");
        }
        out.push_back(std::move(d));
    }
    return out;
}

namespace {

// Critical features of one domain at one moment: indices judged
// discriminative (mask = 0) on a strict majority of the domain's test set.
CriticalFeatureSet compute_critical(const DomainData& domain, int moment,
                                    const DetectorParams& params, const StrategyFlags& flags,
                                    const TrainSettings& settings) {
    const int dim = params.config.dim;
    std::vector<int> zero_counts(static_cast<std::size_t>(dim), 0);
    for (const auto& s : domain.test) {
        FeatureForward fwd = feature_forward(params, s, flags, settings.coop_alpha);
        Mask m = compute_mask(fwd.f, params, settings.ig_steps);
        for (int k = 0; k < dim; ++k) {
            if (m[static_cast<std::size_t>(k)] == 0) ++zero_counts[static_cast<std::size_t>(k)];
        }
    }
    CriticalFeatureSet out;
    out.domain = to_string(domain.kind);
    out.moment = moment;
    const int n = static_cast<int>(domain.test.size());
    for (int k = 0; k < dim; ++k) {
        if (2 * zero_counts[static_cast<std::size_t>(k)] > n) out.indices.push_back(k);
    }
    return out;
}

// Trains on one domain: memory-mixed batches, the main update (cls/more/
// align), then the unlearn/relearn cycles. Early stopping on valid accuracy.
void train_domain(const DomainData& domain, std::size_t domain_index, DetectorParams& params,
                  AdamW& opt, const MemoryBuffer& buffer, const TrainSettings& settings,
                  const StrategyFlags& flags) {
    std::vector<std::size_t> indices(domain.train.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    Rng rng = make_rng(mix_seed(settings.seed, 1000 + domain_index));

    std::vector<const MemoryEntry*> memory_flat;
    for (const auto& [_, entries] : buffer.domains) {
        for (const auto& e : entries) memory_flat.push_back(&e);
    }
    std::size_t memory_cursor = 0;

    DetectorParams best = params;
    double best_acc = -1.0;
    int since_best = 0;

    TermFlags main_terms;
    main_terms.cls = true;
    main_terms.more = flags.more;
    main_terms.align = flags.align && !memory_flat.empty();

    for (int epoch = 0; epoch < settings.max_epochs; ++epoch) {
        shuffle_inplace(indices, rng);
        for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(settings.batch_size)) {
            std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(settings.batch_size));
            std::vector<const PreparedSample*> batch;
            batch.reserve(end - start + 4);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&domain.train[indices[i]]);
            if (flags.mem && !memory_flat.empty()) {
                std::size_t n_mem = (batch.size() + static_cast<std::size_t>(settings.memory_fresh_ratio) - 1) /
                                    static_cast<std::size_t>(settings.memory_fresh_ratio);
                for (std::size_t m = 0; m < n_mem; ++m) {
                    batch.push_back(&memory_flat[memory_cursor % memory_flat.size()]->sample);
                    ++memory_cursor;
                }
            }
            train_step(batch, nullptr, params, opt, settings, main_terms, flags,
                       main_terms.align ? &buffer : nullptr);
            if (flags.less && settings.relearn_cycles > 0) {
                relearn_cycle(batch, params, opt, settings, flags, settings.relearn_cycles);
            }
        }
        double acc = evaluate_accuracy(domain.valid, params, flags, settings.coop_alpha);
        if (acc > best_acc) {
            best_acc = acc;
            best = params;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= settings.patience) break;
        }
    }
    params = best;
}

std::vector<MemoryEntry> pick_memories(const DomainData& domain, const DetectorParams& params,
                                       const StrategyFlags& flags, const TrainSettings& settings,
                                       int k) {
    std::vector<int> labels;
    std::vector<Vec> features;
    labels.reserve(domain.train.size());
    features.reserve(domain.train.size());
    for (const auto& s : domain.train) {
        labels.push_back(s.label);
        features.push_back(feature_forward(params, s, flags, settings.coop_alpha).f);
    }
    auto picked = select_memory_indices(labels, features, k);
    std::vector<MemoryEntry> out;
    out.reserve(picked.size());
    for (std::size_t idx : picked) {
        MemoryEntry e;
        e.sample = domain.train[idx];
        e.f_old = features[idx];  // frozen snapshot
        out.push_back(std::move(e));
    }
    return out;
}

void evaluate_moment(const std::vector<DomainData>& domains, std::size_t upto_inclusive,
                     const DetectorParams& params, const StrategyFlags& flags,
                     const TrainSettings& settings, MomentLog* log) {
    double sum = 0.0;
    for (std::size_t j = 0; j <= upto_inclusive; ++j) {
        double acc = evaluate_accuracy(domains[j].test, params, flags, settings.coop_alpha);
        log->per_domain_accuracy.emplace_back(to_string(domains[j].kind), acc);
        sum += acc;
    }
    log->averaged_accuracy = sum / static_cast<double>(upto_inclusive + 1);
}

}  // namespace

RunResult run_sequence(const std::vector<DomainData>& domains, const RunConfig& config,
                       const StrategyFlags& flags, const std::string& order_id,
                       const std::string& method_label) {
    if (domains.empty()) throw DataError("run_sequence: no domains");
    TrainSettings settings = config.train_settings();
    RunResult result;
    result.params = DetectorParams::init(config.model_config(), config.seed);
    result.memories.capacity_per_domain = config.memory_k;
    AdamW opt(result.params);

    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < domains.size(); ++i) {
        train_domain(domains[i], i, result.params, opt, result.memories, settings, flags);
        if (flags.mem && config.memory_k > 0) {
            result.memories.add_domain(to_string(domains[i].kind),
                                       pick_memories(domains[i], result.params, flags, settings,
                                                     config.memory_k));
        }
        MomentLog log;
        log.moment = static_cast<int>(i) + 1;
        log.order_id = order_id;
        log.method = method_label;
        log.seed = config.seed;
        log.memory_k = flags.mem ? config.memory_k : 0;
        evaluate_moment(domains, i, result.params, flags, settings, &log);
        log.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.moments.push_back(std::move(log));

        for (std::size_t j = 0; j <= i; ++j) {
            result.critical.push_back(compute_critical(domains[j], static_cast<int>(i) + 1,
                                                       result.params, flags, settings));
        }
    }
    return result;
}

RunResult run_joint(const std::vector<DomainData>& domains, const RunConfig& config,
                    const std::string& order_id) {
    if (domains.empty()) throw DataError("run_joint: no domains");
    // One synthetic pooled domain; validation pools every domain's valid split.
    DomainData pooled;
    pooled.kind = domains[0].kind;
    for (const auto& d : domains) {
        pooled.train.insert(pooled.train.end(), d.train.begin(), d.train.end());
        pooled.valid.insert(pooled.valid.end(), d.valid.begin(), d.valid.end());
        pooled.test.insert(pooled.test.end(), d.test.begin(), d.test.end());
    }
    TrainSettings settings = config.train_settings();
    StrategyFlags flags = StrategyFlags::stream();  // plain supervised training on all data

    RunResult result;
    result.params = DetectorParams::init(config.model_config(), config.seed);
    AdamW opt(result.params);
    const auto t0 = std::chrono::steady_clock::now();
    MemoryBuffer empty_buffer;
    train_domain(pooled, 0, result.params, opt, empty_buffer, settings, flags);

    for (std::size_t i = 0; i < domains.size(); ++i) {
        MomentLog log;
        log.moment = static_cast<int>(i) + 1;
        log.order_id = order_id;
        log.method = "joint";
        log.seed = config.seed;
        evaluate_moment(domains, i, result.params, flags, settings, &log);
        log.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.moments.push_back(std::move(log));
    }
    return result;
}

double retention_rate(const CriticalFeatureSet& then_set, const CriticalFeatureSet& now_set) {
    if (then_set.indices.empty()) return 1.0;
    std::set<int> now(now_set.indices.begin(), now_set.indices.end());
    std::size_t inter = 0;
    for (int idx : then_set.indices) inter += now.count(idx);
    return static_cast<double>(inter) / static_cast<double>(then_set.indices.size());
}

std::vector<std::pair<std::string, std::vector<PerturbationKind>>> default_orders(
    const std::vector<PerturbationKind>& kinds, std::uint64_t seed) {
    std::vector<std::pair<std::string, std::vector<PerturbationKind>>> orders;
    orders.emplace_back("identity", kinds);
    std::vector<PerturbationKind> rev(kinds.rbegin(), kinds.rend());
    orders.emplace_back("reverse", rev);
    for (int s = 1; s <= 2; ++s) {
        std::vector<PerturbationKind> shuffled = kinds;
        Rng rng = make_rng(mix_seed(seed, 7000 + static_cast<std::uint64_t>(s)));
        shuffle_inplace(shuffled, rng);
        orders.emplace_back("shuffle" + std::to_string(s), shuffled);
    }
    return orders;
}

std::vector<SweepPoint> sweep_memory(const std::vector<DomainData>& domains,
                                     const RunConfig& config, const std::vector<int>& k_values,
                                     const std::string& order_id) {
    std::vector<SweepPoint> out;
    for (int k : k_values) {
        RunConfig c = config;
        c.memory_k = k;
        StrategyFlags flags = c.strategy_flags();
        RunResult r = run_sequence(domains, c, flags, order_id, "k" + std::to_string(k));
        SweepPoint p;
        p.k = k;
        p.moments = std::move(r.moments);
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------

void write_moment_logs(const std::string& path, const std::vector<MomentLog>& logs) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write moment logs: " + path);
    for (const auto& log : logs) {
        json per = json::object();
        for (const auto& [domain, acc] : log.per_domain_accuracy) per[domain] = acc;
        json j{{"moment", log.moment},
               {"order_id", log.order_id},
               {"method", log.method},
               {"seed", log.seed},
               {"memory_k", log.memory_k},
               {"per_domain_accuracy", per},
               {"domain_order", json::array()},
               {"averaged_accuracy", log.averaged_accuracy},
               {"wall_seconds", log.wall_seconds}};
        for (const auto& [domain, _] : log.per_domain_accuracy) j["domain_order"].push_back(domain);
        out << j.dump() << "\n";
    }
}

std::vector<MomentLog> read_moment_logs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open moment logs: " + path);
    std::vector<MomentLog> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        MomentLog log;
        log.moment = j.at("moment").get<int>();
        log.order_id = j.at("order_id").get<std::string>();
        log.method = j.at("method").get<std::string>();
        log.seed = j.at("seed").get<std::uint64_t>();
        log.memory_k = j.value("memory_k", 0);
        log.averaged_accuracy = j.at("averaged_accuracy").get<double>();
        log.wall_seconds = j.value("wall_seconds", 0.0);
        const auto& per = j.at("per_domain_accuracy");
        for (const auto& domain : j.at("domain_order")) {
            std::string name = domain.get<std::string>();
            log.per_domain_accuracy.emplace_back(name, per.at(name).get<double>());
        }
        out.push_back(std::move(log));
    }
    return out;
}

void write_critical_sets(const std::string& path, const std::vector<CriticalFeatureSet>& sets) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write critical sets: " + path);
    for (const auto& s : sets) {
        json j{{"domain", s.domain}, {"moment", s.moment}, {"indices", s.indices}};
        out << j.dump() << "\n";
    }
}

std::vector<CriticalFeatureSet> read_critical_sets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open critical sets: " + path);
    std::vector<CriticalFeatureSet> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        CriticalFeatureSet s;
        s.domain = j.at("domain").get<std::string>();
        s.moment = j.at("moment").get<int>();
        s.indices = j.at("indices").get<std::vector<int>>();
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct TableData {
    std::vector<std::string> methods;  // row order
    int max_moment = 0;
    std::vector<std::string> orders;
    // method -> moment -> accumulated (sum, count) over orders/seeds
    std::map<std::string, std::map<int, std::pair<double, int>>> cells;
    // method -> order -> final-moment (sum, count) over seeds
    std::map<std::string, std::map<std::string, std::pair<double, int>>> final_by_order;
};

TableData collect(const std::vector<MomentLog>& logs) {
    TableData t;
    for (const auto& log : logs) t.max_moment = std::max(t.max_moment, log.moment);
    for (const auto& log : logs) {
        if (std::find(t.methods.begin(), t.methods.end(), log.method) == t.methods.end()) {
            t.methods.push_back(log.method);
        }
        if (std::find(t.orders.begin(), t.orders.end(), log.order_id) == t.orders.end()) {
            t.orders.push_back(log.order_id);
        }
        auto& cell = t.cells[log.method][log.moment];
        cell.first += log.averaged_accuracy;
        cell.second += 1;
        if (log.moment == t.max_moment) {
            auto& fin = t.final_by_order[log.method][log.order_id];
            fin.first += log.averaged_accuracy;
            fin.second += 1;
        }
    }
    return t;
}

std::string fmt_acc(const std::pair<double, int>& cell) {
    if (cell.second == 0) return "";
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << 100.0 * cell.first / cell.second;
    return out.str();
}

}  // namespace

std::string moments_table_csv(const std::vector<MomentLog>& logs) {
    TableData t = collect(logs);
    std::ostringstream out;
    out << "method";
    for (int m = 1; m <= t.max_moment; ++m) out << ",T" << m;
    for (const auto& o : t.orders) out << ",final_" << o;
    out << "\n";
    for (const auto& method : t.methods) {
        out << method;
        for (int m = 1; m <= t.max_moment; ++m) out << "," << fmt_acc(t.cells[method][m]);
        for (const auto& o : t.orders) out << "," << fmt_acc(t.final_by_order[method][o]);
        out << "\n";
    }
    return out.str();
}

std::string moments_table_markdown(const std::vector<MomentLog>& logs) {
    TableData t = collect(logs);
    std::ostringstream out;
    out << "| method |";
    for (int m = 1; m <= t.max_moment; ++m) out << " T" << m << " |";
    for (const auto& o : t.orders) out << " final(" << o << ") |";
    out << "\n|---|";
    for (int m = 0; m < t.max_moment + static_cast<int>(t.orders.size()); ++m) out << "---|";
    out << "\n";
    for (const auto& method : t.methods) {
        out << "| " << method << " |";
        for (int m = 1; m <= t.max_moment; ++m) out << " " << fmt_acc(t.cells[method][m]) << " |";
        for (const auto& o : t.orders) out << " " << fmt_acc(t.final_by_order[method][o]) << " |";
        out << "\n";
    }
    return out.str();
}

namespace {

struct RetentionMatrix {
    std::vector<std::string> domains;  // first-appearance order
    int max_moment = 0;
    std::map<std::string, std::map<int, double>> values;  // domain -> moment -> rate
};

RetentionMatrix retention_from_sets(const std::vector<CriticalFeatureSet>& sets) {
    RetentionMatrix m;
    std::map<std::string, const CriticalFeatureSet*> first_seen;
    std::vector<CriticalFeatureSet> ordered = sets;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const CriticalFeatureSet& a, const CriticalFeatureSet& b) {
                         return a.moment < b.moment;
                     });
    for (const auto& s : ordered) {
        m.max_moment = std::max(m.max_moment, s.moment);
        if (!first_seen.count(s.domain)) {
            first_seen[s.domain] = &s;
            m.domains.push_back(s.domain);
        }
    }
    for (const auto& s : ordered) {
        m.values[s.domain][s.moment] = retention_rate(*first_seen[s.domain], s);
    }
    return m;
}

}  // namespace

std::string retention_matrix_csv(const std::vector<CriticalFeatureSet>& sets) {
    RetentionMatrix m = retention_from_sets(sets);
    std::ostringstream out;
    out << "domain";
    for (int t = 1; t <= m.max_moment; ++t) out << ",T" << t;
    out << "\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& domain : m.domains) {
        out << domain;
        for (int t = 1; t <= m.max_moment; ++t) {
            out << ",";
            auto it = m.values[domain].find(t);
            if (it != m.values[domain].end()) out << it->second;
        }
        out << "\n";
    }
    return out.str();
}

std::string retention_matrix_markdown(const std::vector<CriticalFeatureSet>& sets) {
    RetentionMatrix m = retention_from_sets(sets);
    std::ostringstream out;
    out << "| domain |";
    for (int t = 1; t <= m.max_moment; ++t) out << " T" << t << " |";
    out << "\n|---|";
    for (int t = 0; t < m.max_moment; ++t) out << "---|";
    out << "\n" << std::fixed << std::setprecision(4);
    for (const auto& domain : m.domains) {
        out << "| " << domain << " |";
        for (int t = 1; t <= m.max_moment; ++t) {
            out << " ";
            auto it = m.values[domain].find(t);
            if (it != m.values[domain].end()) out << it->second;
            out << " |";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace contiguard
