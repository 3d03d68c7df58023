// Acceptance suite: one line per criterion, non-zero exit on any failure.
// An optional argv filter runs a subset, e.g. `acceptance_tests 5 7`.

#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "contiguard/config.hpp"
#include "contiguard/corpus.hpp"
#include "contiguard/discrim.hpp"
#include "contiguard/harness.hpp"
#include "contiguard/model.hpp"
#include "contiguard/replay.hpp"
#include "contiguard/rng.hpp"
#include "contiguard/train.hpp"
#include "perturb_checks.hpp"

using namespace contiguard;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << " [" << std::fixed << std::setprecision(1) << seconds << "s]\n";
    std::cout.flush();
    if (!pass) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

const Lexicons& lexicons() {
    static const Lexicons lex = Lexicons::load(CONTIGUARD_DATA_DIR);
    return lex;
}

Vec random_vec(Rng& rng, int n, double scale = 1.0) {
    Vec v(static_cast<std::size_t>(n));
    for (double& x : v) x = scale * rand_normal(rng);
    return v;
}

std::vector<std::uint32_t> random_buckets(Rng& rng, int buckets, std::size_t lo, std::size_t hi) {
    std::vector<std::uint32_t> out;
    std::size_t n = lo + rand_index(rng, hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(static_cast<std::uint32_t>(rand_index(rng, static_cast<std::size_t>(buckets))));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 1: finite-difference gradient checks over every parameter group.

void criterion_1() {
    Timer timer;
    ModelConfig mc;
    mc.dim = 6;
    mc.hidden = 4;
    mc.buckets = 40;
    StrategyFlags flags;
    TrainSettings settings;
    settings.weights.lambda = 0.35;
    settings.weights.gamma = 0.8;
    TermFlags terms;
    terms.cls = terms.more = terms.less = terms.align = true;

    int instances = 0, bad = 0;
    double worst = 0.0;
    for (int inst = 0; inst < 22; ++inst) {
        Rng rng = make_rng(1000 + static_cast<std::uint64_t>(inst));
        DetectorParams params = DetectorParams::init(mc, 2000 + static_cast<std::uint64_t>(inst));
        std::vector<PreparedSample> samples;
        for (int i = 0; i < 3; ++i) {
            PreparedSample s;
            s.id = "s" + std::to_string(i);
            s.label = i % 2;
            s.text_buckets = random_buckets(rng, mc.buckets, 3, 8);
            if (i != 2) s.aux_buckets = random_buckets(rng, mc.buckets, 3, 8);
            samples.push_back(std::move(s));
        }
        std::vector<const PreparedSample*> batch;
        for (const auto& s : samples) batch.push_back(&s);
        std::vector<Mask> masks;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            Mask m(static_cast<std::size_t>(mc.dim));
            for (auto& b : m) b = static_cast<std::uint8_t>(rng() % 2);
            masks.push_back(m);
        }
        MemoryBuffer buffer;
        for (int dom = 0; dom < 2; ++dom) {
            std::vector<MemoryEntry> entries;
            for (int j = 0; j < 2; ++j) {
                MemoryEntry e;
                e.sample.id = "m";
                e.sample.label = j;
                e.sample.text_buckets = random_buckets(rng, mc.buckets, 3, 8);
                e.sample.aux_buckets = random_buckets(rng, mc.buckets, 3, 8);
                e.f_old = random_vec(rng, mc.dim);
                entries.push_back(std::move(e));
            }
            buffer.add_domain("d" + std::to_string(dom), std::move(entries));
        }

        auto loss_total = [&]() {
            return batch_loss_and_gradients(batch, &masks, params, settings, terms, flags, &buffer)
                .report.total;
        };
        BatchLoss analytic =
            batch_loss_and_gradients(batch, &masks, params, settings, terms, flags, &buffer);

        const double eps = 1e-4;
        auto check_param = [&](double* p, double g) {
            double saved = *p;
            *p = saved + eps;
            double hi = loss_total();
            *p = saved - eps;
            double lo = loss_total();
            *p = saved;
            double fd = (hi - lo) / (2 * eps);
            double rel = std::abs(fd - g) / std::max({1e-6, std::abs(fd), std::abs(g)});
            worst = std::max(worst, rel);
            if (rel > 1e-3) ++bad;
        };
        for (std::size_t i = 0; i < params.head_hidden_w.data.size(); ++i)
            check_param(&params.head_hidden_w.data[i], analytic.grads.head.hidden_w.data[i]);
        for (std::size_t i = 0; i < params.head_hidden_b.size(); ++i)
            check_param(&params.head_hidden_b[i], analytic.grads.head.hidden_b[i]);
        for (std::size_t i = 0; i < params.head_out_w.data.size(); ++i)
            check_param(&params.head_out_w.data[i], analytic.grads.head.out_w.data[i]);
        for (std::size_t i = 0; i < params.head_out_b.size(); ++i)
            check_param(&params.head_out_b[i], analytic.grads.head.out_b[i]);
        for (std::size_t i = 0; i < params.gate.conv_kernel.size(); ++i)
            check_param(&params.gate.conv_kernel[i], analytic.grads.gate.conv_kernel[i]);
        for (std::size_t i = 0; i < params.gate.gate_bias.size(); ++i)
            check_param(&params.gate.gate_bias[i], analytic.grads.gate.gate_bias[i]);
        for (std::size_t i = 0; i < params.gate.gate_weights.data.size(); ++i)
            check_param(&params.gate.gate_weights.data[i], analytic.grads.gate.gate_weights.data[i]);
        for (const auto& [row, g] : analytic.grads.embedding) {
            for (int k = 0; k < mc.dim; ++k) {
                check_param(&params.embedding.at(static_cast<int>(row), k),
                            g[static_cast<std::size_t>(k)]);
            }
        }
        ++instances;
    }
    std::ostringstream detail;
    detail << instances << " instances, worst relative error " << std::scientific
           << std::setprecision(2) << worst;
    report(1, "gradient correctness vs central finite differences", bad == 0 && instances >= 20,
           detail.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// Criterion 2: integrated-gradient completeness.

void criterion_2() {
    Timer timer;
    ModelConfig mc;
    mc.dim = 10;
    mc.hidden = 6;
    mc.buckets = 16;
    int bad = 0, instances = 0;
    double worst = 0.0;
    for (int inst = 0; inst < 55; ++inst) {
        Rng rng = make_rng(500 + static_cast<std::uint64_t>(inst));
        DetectorParams params = DetectorParams::init(mc, 900 + static_cast<std::uint64_t>(inst));
        Vec f = random_vec(rng, mc.dim, 1.5);
        Vec baseline(static_cast<std::size_t>(mc.dim), 0.0);
        for (int y = 0; y < 2; ++y) {
            Vec a = integrated_gradients(f, params, y, baseline, 100);
            double total = 0.0;
            for (double x : a) total += x;
            double fy = head_logits(params, f)[static_cast<std::size_t>(y)];
            double f0 = head_logits(params, baseline)[static_cast<std::size_t>(y)];
            double residual = std::abs(total - (fy - f0));
            double bound = 1e-3 * std::max(1.0, std::abs(fy));
            worst = std::max(worst, residual / bound);
            if (residual > bound) ++bad;
        }
        ++instances;
    }

    // Linear score: exact for any step count.
    bool linear_ok = true;
    Rng rng = make_rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 9;
        Vec v = random_vec(rng, d);
        Vec f = random_vec(rng, d, 2.0);
        Vec baseline(static_cast<std::size_t>(d), 0.0);
        for (int steps : {1, 2, 5, 33, 100}) {
            Vec a = integrated_gradients(f, baseline, steps, [&](const Vec&) { return v; });
            for (int k = 0; k < d; ++k) {
                auto kk = static_cast<std::size_t>(k);
                if (std::abs(a[kk] - f[kk] * v[kk]) > 1e-9) linear_ok = false;
            }
        }
    }
    std::ostringstream detail;
    detail << instances << " tanh instances, worst residual/bound " << std::fixed
           << std::setprecision(3) << worst << ", linear head exact: " << (linear_ok ? "yes" : "no");
    report(2, "integrated-gradient completeness", bad == 0 && linear_ok && instances >= 50,
           detail.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// Criterion 3: mask and loss identities.

void criterion_3() {
    Timer timer;
    bool ok = true;
    std::ostringstream why;

    Rng rng = make_rng(303);
    for (int trial = 0; trial < 500 && ok; ++trial) {
        const int d = 12;
        Vec a0 = random_vec(rng, d);
        Vec a1 = random_vec(rng, d);
        if (trial % 4 == 0) a0[rand_index(rng, d)] = 0.0;
        Mask m = less_discriminative_mask(a0, a1);
        for (int k = 0; k < d; ++k) {
            auto kk = static_cast<std::size_t>(k);
            std::uint8_t expect = (a0[kk] * a1[kk] > 0.0) ? 1 : 0;
            if (m[kk] != expect) {
                ok = false;
                why << "mask mismatch at " << k;
            }
        }
    }

    // loss_less >= log 2, equality at the uniform output.
    ModelConfig mc;
    mc.dim = 8;
    mc.hidden = 5;
    mc.buckets = 16;
    const double log2 = std::log(2.0);
    for (int trial = 0; trial < 300 && ok; ++trial) {
        DetectorParams p = DetectorParams::init(mc, 40 + static_cast<std::uint64_t>(trial));
        Mask m(static_cast<std::size_t>(mc.dim));
        for (auto& b : m) b = static_cast<std::uint8_t>(rng() % 2);
        double v = loss_less(p, random_vec(rng, mc.dim, 2.0), m);
        if (v < log2 - 1e-12) {
            ok = false;
            why << "loss_less below log2: " << v;
        }
    }
    {
        DetectorParams p = DetectorParams::init(mc, 4);
        p.head_hidden_w.fill(0.0);
        std::fill(p.head_hidden_b.begin(), p.head_hidden_b.end(), 0.0);
        p.head_out_w.fill(0.0);
        std::fill(p.head_out_b.begin(), p.head_out_b.end(), 0.0);
        Mask m(static_cast<std::size_t>(mc.dim), 1);
        Rng r2 = make_rng(5);
        double v = loss_less(p, random_vec(r2, mc.dim), m);
        if (std::abs(v - log2) > 1e-12) {
            ok = false;
            why << "uniform-output loss_less != log2";
        }
    }

    // loss_more on a linear (zero-bias) head equals CE of sign-flipped logits.
    {
        ModelConfig lin;
        lin.dim = 1;
        lin.hidden = 1;
        lin.buckets = 4;
        DetectorParams p = DetectorParams::init(lin, 0);
        p.head_hidden_w.at(0, 0) = std::atanh(0.5);
        p.head_hidden_b[0] = 0.0;
        p.head_out_w.at(0, 0) = 4.0;
        p.head_out_w.at(0, 1) = -4.0;
        p.head_out_b = {0.0, 0.0};
        double expected = std::log(1.0 + std::exp(4.0));  // hand-computed CE of (-2, 2) vs label 0
        double got = loss_more(p, Vec{1.0}, 0);
        if (std::abs(got - expected) > 1e-9) {
            ok = false;
            why << "loss_more flip identity broke: " << got << " vs " << expected;
        }
        // General zero-bias heads flip logits exactly.
        ModelConfig mc2;
        mc2.dim = 6;
        mc2.hidden = 4;
        mc2.buckets = 8;
        for (int trial = 0; trial < 200 && ok; ++trial) {
            DetectorParams q = DetectorParams::init(mc2, 700 + static_cast<std::uint64_t>(trial));
            std::fill(q.head_hidden_b.begin(), q.head_hidden_b.end(), 0.0);
            std::fill(q.head_out_b.begin(), q.head_out_b.end(), 0.0);
            Vec f = random_vec(rng, mc2.dim, 2.0);
            Vec z = head_logits(q, f);
            Vec flipped = {-z[0], -z[1]};
            double direct = cross_entropy(softmax(flipped), trial % 2);
            double viaop = loss_more(q, f, trial % 2);
            if (std::abs(direct - viaop) > 1e-9) {
                ok = false;
                why << "flip mismatch " << direct << " vs " << viaop;
            }
        }
    }
    report(3, "mask and loss identities", ok, why.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// Criterion 4: alignment-loss algebra.

void criterion_4() {
    Timer timer;
    bool ok = true;
    std::ostringstream why;
    Rng rng = make_rng(404);

    // N = 1: exact zero.
    for (int trial = 0; trial < 50 && ok; ++trial) {
        MemoryBuffer buffer;
        MemoryEntry e;
        e.sample.id = "a";
        e.f_old = random_vec(rng, 6, 2.0);
        buffer.add_domain("d", {e});
        Vec cur = random_vec(rng, 6, 2.0);
        double loss = loss_align(buffer, [&](const PreparedSample&) { return cur; });
        if (loss != 0.0) {
            ok = false;
            why << "N=1 not exactly zero: " << loss;
        }
    }

    // Two symmetric samples with cos = 1: log 2 within 1e-9.
    {
        MemoryBuffer buffer;
        MemoryEntry a, b;
        a.sample.id = "a";
        a.f_old = {1.0, 0.0, 0.0};
        b.sample.id = "b";
        b.f_old = {0.0, 3.0, 0.0};
        buffer.add_domain("d", {a, b});
        double loss = loss_align(buffer, [&](const PreparedSample& s) {
            return s.id == "a" ? Vec{5.0, 0.0, 0.0} : Vec{0.0, 0.5, 0.0};
        });
        if (std::abs(loss - std::log(2.0)) > 1e-9) {
            ok = false;
            why << "symmetric two-sample case != log2: " << loss;
        }
    }

    // Random cases vs an independent formula re-evaluation.
    for (int trial = 0; trial < 100 && ok; ++trial) {
        std::size_t domains = 1 + rand_index(rng, 3);
        std::vector<std::vector<MemoryEntry>> storage(domains);
        std::vector<std::vector<Vec>> cur(domains);
        for (std::size_t i = 0; i < domains; ++i) {
            std::size_t n = 1 + rand_index(rng, 5);
            for (std::size_t j = 0; j < n; ++j) {
                MemoryEntry e;
                e.sample.id = "e";
                e.f_old = random_vec(rng, 5, 2.0);
                storage[i].push_back(std::move(e));
                cur[i].push_back(random_vec(rng, 5, 2.0));
            }
        }
        std::vector<std::vector<const MemoryEntry*>> per_domain(domains);
        for (std::size_t i = 0; i < domains; ++i) {
            for (const auto& e : storage[i]) per_domain[i].push_back(&e);
        }
        double got = align_forward(per_domain, cur).loss;
        double expect = 0.0;
        {
            double sum = 0.0;
            for (std::size_t i = 0; i < domains; ++i) {
                double mean = 0.0, sum_exp = 0.0;
                for (std::size_t j = 0; j < storage[i].size(); ++j) {
                    double c = cosine(storage[i][j].f_old, cur[i][j]);
                    mean += c;
                    sum_exp += std::exp(c);
                }
                mean /= static_cast<double>(storage[i].size());
                sum += mean - std::log(sum_exp);
            }
            expect = -sum / static_cast<double>(domains);
        }
        if (std::abs(got - expect) > 1e-9) {
            ok = false;
            why << "random case mismatch: " << got << " vs " << expect;
        }
    }
    report(4, "alignment-loss algebra", ok, why.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// Criterion 5: perturbation operator contracts.

void criterion_5() {
    Timer timer;
    const Lexicons& lex = lexicons();
    std::size_t violations = 0, nondeterministic = 0;
    std::string first_violation;
    Rng rng = make_rng(505);
    const int per_operator = 10000;
    for (auto kind : kAllPerturbationKinds) {
        for (int i = 0; i < per_operator; ++i) {
            std::string text = checks::random_text(rng, lex);
            PerturbConfig cfg;
            cfg.kind = kind;
            cfg.seed = rng();
            cfg.rate = 0.05 + 0.95 * rand_real(rng);
            std::string out = apply(text, cfg, lex);
            if (out != apply(text, cfg, lex)) ++nondeterministic;
            std::string err = checks::check_operator(text, out, cfg, lex);
            if (!err.empty()) {
                ++violations;
                if (first_violation.empty()) {
                    first_violation = to_string(kind) + ": " + err + " [" + text + " -> " + out + "]";
                }
            }
        }
    }
    std::ostringstream detail;
    detail << per_operator << " applications x 9 operators, " << violations << " violations, "
           << nondeterministic << " determinism breaks";
    if (!first_violation.empty()) detail << "; first: " << first_violation;
    report(5, "perturbation operator contracts", violations == 0 && nondeterministic == 0,
           detail.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// Criterion 6: dataset-pipeline formulas vs brute-force oracles.

void criterion_6() {
    Timer timer;
    bool ok = true;
    std::ostringstream why;
    Rng rng = make_rng(606);
    std::vector<std::string> vocab = {"aa", "bb", "cc", "dd", "ee"};

    auto make_corpus = [&](std::size_t docs) {
        std::vector<LabeledText> corpus;
        for (std::size_t i = 0; i < docs; ++i) {
            LabeledText s;
            s.id = "d" + std::to_string(i);
            s.label = static_cast<int>(rng() % 2);
            std::size_t words = 1 + rand_index(rng, 6);
            for (std::size_t w = 0; w < words; ++w) {
                if (w) s.text += ' ';
                s.text += vocab[rand_index(rng, vocab.size())];
            }
            corpus.push_back(std::move(s));
        }
        return corpus;
    };

    // MI vs counting oracle on 100 random corpora.
    for (int trial = 0; trial < 100 && ok; ++trial) {
        auto corpus = make_corpus(4 + rand_index(rng, 60));
        for (const auto& word : vocab) {
            double n = static_cast<double>(corpus.size());
            double nw = 0, nc = 0, nj = 0;
            for (const auto& s : corpus) {
                bool has = false;
                for (const auto& t : split_whitespace(s.text)) {
                    if (t == word) has = true;
                }
                nw += has ? 1 : 0;
                nc += s.label == 1 ? 1 : 0;
                nj += (has && s.label == 1) ? 1 : 0;
            }
            double expect = nj == 0 ? 0.0 : (nj / n) / ((nw / n) * (nc / n));
            double got = mutual_information(word, corpus);
            if (std::abs(got - expect) > 1e-12) {
                ok = false;
                why << "MI mismatch " << got << " vs " << expect;
            }
        }
    }

    // Toxicity-drop expectation vs direct summation oracle on 100 corpora.
    LexiconRatioScorer scorer(lexicons());
    std::vector<std::string> tox = {"idiot", "fool", "moron"};
    for (int trial = 0; trial < 100 && ok; ++trial) {
        std::vector<LabeledText> texts;
        std::size_t n = 1 + rand_index(rng, 6);
        for (std::size_t i = 0; i < n; ++i) {
            LabeledText s;
            s.id = "t" + std::to_string(i);
            s.label = 1;
            std::size_t words = 2 + rand_index(rng, 6);
            for (std::size_t w = 0; w < words; ++w) {
                if (w) s.text += ' ';
                s.text += (rng() % 2 == 0) ? tox[rand_index(rng, tox.size())]
                                           : vocab[rand_index(rng, vocab.size())];
            }
            texts.push_back(std::move(s));
        }
        const std::string word = tox[rand_index(rng, tox.size())];
        double expect = 0.0;
        for (const auto& t : texts) {
            std::string without;
            for (const auto& tok : split_whitespace(t.text)) {
                if (tok != word) {
                    if (!without.empty()) without += ' ';
                    without += tok;
                }
            }
            expect += scorer.score(t.text) - scorer.score(without);
        }
        expect /= static_cast<double>(texts.size());
        double got = toxicity_drop_expectation(word, texts, scorer);
        if (std::abs(got - expect) > 1e-12) {
            ok = false;
            why << "E_w mismatch " << got << " vs " << expect;
        }
    }

    // Spurious threshold vs a hand mean + population-std oracle.
    for (int trial = 0; trial < 50 && ok; ++trial) {
        auto corpus = make_corpus(6 + rand_index(rng, 40));
        std::vector<double> mis;
        for (const auto& w : vocab) mis.push_back(mutual_information(w, corpus));
        double mean = 0.0;
        for (double v : mis) mean += v;
        mean /= static_cast<double>(mis.size());
        double var = 0.0;
        for (double v : mis) var += (v - mean) * (v - mean);
        var /= static_cast<double>(mis.size());
        double threshold = mean + std::sqrt(var);
        std::set<std::string> expect;
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            if (mis[i] > threshold) expect.insert(vocab[i]);
        }
        if (select_spurious(vocab, corpus) != expect) {
            ok = false;
            why << "spurious selection differs from hand oracle";
        }
    }
    report(6, "pipeline formulas vs brute-force oracles", ok, why.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// Criteria 7-9 share the desk-scale continual experiment.

struct ExperimentRun {
    std::vector<MomentLog> moments;
    std::vector<CriticalFeatureSet> critical;
};

struct SeedResults {
    std::map<std::string, ExperimentRun> by_method;
};

RunConfig experiment_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.quota = 500;  // 300/50/150 per kind
    cfg.kinds = "insert,repeat,swap,homoglyph,maskword";
    cfg.synthetic_samples = 9000;
    return cfg;
}

std::vector<DomainData> build_experiment_domains(const RunConfig& cfg) {
    const Lexicons& lex = lexicons();
    auto raw = synthesize_raw(cfg.synthetic_samples, cfg.seed, lex);
    DictionarySpellChecker checker =
        DictionarySpellChecker::from_file(std::string(CONTIGUARD_DATA_DIR) + "/dictionary.txt");
    auto cleaned = clean(raw, checker, nullptr);
    auto balanced = rebalance(cleaned, cfg.seed);
    LexiconRatioScorer scorer(lex);
    ThresholdDetector detector(scorer, cfg.attack_threshold);
    DynescapeOptions options;
    options.kinds = cfg.kind_list();
    options.per_kind_quota = cfg.quota;
    options.seed = cfg.seed;
    options.perturb = cfg.perturb_config(options.kinds.front());
    auto dataset = build_dynescape(balanced, detector, lex, options);
    AuxiliaryProvider provider(lex, cfg.llm_config());
    return prepare_domains(dataset, options.kinds, cfg.model_config(), provider);
}

ExperimentRun run_variant(const std::vector<DomainData>& domains, RunConfig cfg,
                          const StrategyFlags& flags, const std::string& label) {
    if (label == "wo_mem" || label == "k0") cfg.memory_k = 0;
    RunResult r = run_sequence(domains, cfg, flags, "identity", label);
    ExperimentRun out;
    out.moments = std::move(r.moments);
    out.critical = std::move(r.critical);
    return out;
}

double final_mean(const std::vector<SeedResults>& seeds, const std::string& method) {
    double sum = 0.0;
    int n = 0;
    for (const auto& s : seeds) {
        const auto& moments = s.by_method.at(method).moments;
        sum += moments.back().averaged_accuracy;
        ++n;
    }
    return sum / n;
}

double first_domain_retention(const ExperimentRun& run, const std::string& first_domain,
                              int final_moment) {
    const CriticalFeatureSet* then_set = nullptr;
    const CriticalFeatureSet* now_set = nullptr;
    for (const auto& c : run.critical) {
        if (c.domain != first_domain) continue;
        if (c.moment == 1) then_set = &c;
        if (c.moment == final_moment) now_set = &c;
    }
    if (!then_set || !now_set) return -1.0;
    return retention_rate(*then_set, *now_set);
}

std::vector<SeedResults> g_experiment;
bool g_experiment_ran = false;

void run_experiment() {
    if (g_experiment_ran) return;
    g_experiment_ran = true;
    std::vector<std::string> methods = {"full",    "stream",  "wo_aux", "wo_coop",     "wo_disc",
                                        "wo_more", "wo_less", "wo_mem", "wo_align",    "wo_disc_align"};
    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
        RunConfig cfg = experiment_config(seed);
        auto domains = build_experiment_domains(cfg);
        SeedResults results;
        for (const auto& method : methods) {
            StrategyFlags flags;
            if (method == "full") {
                flags = StrategyFlags::full();
            } else if (method == "stream") {
                flags = StrategyFlags::stream();
            } else if (method == "wo_disc_align") {
                flags = StrategyFlags::full();
                flags.more = flags.less = flags.align = false;
            } else {
                flags = *StrategyFlags::ablation(method);
            }
            results.by_method[method] = run_variant(domains, cfg, flags, method);
            std::cout << "  [experiment] seed " << seed << " " << method << " final mean "
                      << std::fixed << std::setprecision(4)
                      << results.by_method[method].moments.back().averaged_accuracy << "\n";
            std::cout.flush();
        }
        g_experiment.push_back(std::move(results));
    }
}

void criterion_7() {
    Timer timer;
    run_experiment();
    std::ostringstream why;

    double full = final_mean(g_experiment, "full");
    double stream = final_mean(g_experiment, "stream");
    bool a_ok = full >= stream + 0.02;
    why << "(a) full " << std::fixed << std::setprecision(4) << full << " vs stream " << stream;

    bool b_ok = true;
    for (const auto& name : StrategyFlags::ablation_names()) {
        double abl = final_mean(g_experiment, name);
        if (abl > full + 0.005) {
            b_ok = false;
            why << "; (b) " << name << " " << abl << " exceeds full + 0.5pt";
        }
    }

    const std::string first_domain = "insert";
    double ret_full = 0.0, ret_ablated = 0.0;
    for (const auto& s : g_experiment) {
        ret_full += first_domain_retention(s.by_method.at("full"), first_domain, 5);
        ret_ablated += first_domain_retention(s.by_method.at("wo_disc_align"), first_domain, 5);
    }
    ret_full /= static_cast<double>(g_experiment.size());
    ret_ablated /= static_cast<double>(g_experiment.size());
    bool c_ok = ret_full > ret_ablated;
    why << "; (c) retention full " << ret_full << " vs wo_disc+wo_align " << ret_ablated;

    report(7, "desk-scale continual experiment", a_ok && b_ok && c_ok, why.str(), timer.seconds());
}

void criterion_8() {
    Timer timer;
    run_experiment();
    // k = 8 is the full method; k = 0 is the memoryless variant.
    double k8 = final_mean(g_experiment, "full");
    double k0 = final_mean(g_experiment, "wo_mem");
    std::ostringstream why;
    why << "k=8 " << std::fixed << std::setprecision(4) << k8 << " vs k=0 " << k0;
    report(8, "memory sweep direction (k=8 vs k=0)", k8 >= k0, why.str(), timer.seconds());
}

void criterion_9() {
    Timer timer;
    run_experiment();
    RunConfig cfg = experiment_config(0);
    auto domains = build_experiment_domains(cfg);
    ExperimentRun again = run_variant(domains, cfg, StrategyFlags::full(), "full");
    const auto& first = g_experiment[0].by_method.at("full");
    bool ok = first.moments.size() == again.moments.size();
    for (std::size_t i = 0; ok && i < first.moments.size(); ++i) {
        ok = first.moments[i].averaged_accuracy == again.moments[i].averaged_accuracy &&
             first.moments[i].per_domain_accuracy == again.moments[i].per_domain_accuracy;
    }
    // Critical sets must match as well (wall-clock is excluded by design).
    ok = ok && first.critical.size() == again.critical.size();
    for (std::size_t i = 0; ok && i < first.critical.size(); ++i) {
        ok = first.critical[i].domain == again.critical[i].domain &&
             first.critical[i].moment == again.critical[i].moment &&
             first.critical[i].indices == again.critical[i].indices;
    }
    report(9, "end-to-end determinism in stub mode", ok, "", timer.seconds());
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto want = [&](int id) { return only.empty() || only.count(id) > 0; };

    if (want(1)) criterion_1();
    if (want(2)) criterion_2();
    if (want(3)) criterion_3();
    if (want(4)) criterion_4();
    if (want(5)) criterion_5();
    if (want(6)) criterion_6();
    if (want(7)) criterion_7();
    if (want(8)) criterion_8();
    if (want(9)) criterion_9();

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
