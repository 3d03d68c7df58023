#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "contiguard/checkpoint.hpp"
#include "contiguard/errors.hpp"
#include "contiguard/model.hpp"
#include "contiguard/rng.hpp"
#include "contiguard/train.hpp"

using namespace contiguard;

namespace {

ModelConfig tiny_config() {
    ModelConfig mc;
    mc.dim = 6;
    mc.hidden = 4;
    mc.buckets = 48;
    return mc;
}

PreparedSample make_ps(const std::string& id, int label, std::vector<std::uint32_t> text_buckets,
                       std::vector<std::uint32_t> aux_buckets = {}) {
    PreparedSample s;
    s.id = id;
    s.label = label;
    s.text_buckets = std::move(text_buckets);
    s.aux_buckets = std::move(aux_buckets);
    return s;
}

std::vector<std::uint32_t> random_buckets(Rng& rng, int buckets, std::size_t lo = 3,
                                          std::size_t hi = 10) {
    std::vector<std::uint32_t> out;
    std::size_t n = lo + rand_index(rng, hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(static_cast<std::uint32_t>(rand_index(rng, static_cast<std::size_t>(buckets))));
    }
    return out;
}

DetectorParams zero_head_params(const ModelConfig& mc) {
    DetectorParams p = DetectorParams::init(mc, 0);
    p.head_hidden_w.fill(0.0);
    std::fill(p.head_hidden_b.begin(), p.head_hidden_b.end(), 0.0);
    p.head_out_w.fill(0.0);
    std::fill(p.head_out_b.begin(), p.head_out_b.end(), 0.0);
    return p;
}

}  // namespace

TEST_CASE("encode of empty text is the zero vector") {
    ModelConfig mc = tiny_config();
    DetectorParams params = DetectorParams::init(mc, 1);
    Vec x = encode("", params);
    REQUIRE(static_cast<int>(x.size()) == mc.dim);
    for (double v : x) CHECK(v == 0.0);
}

TEST_CASE("encode is deterministic and distinguishes anagrams") {
    ModelConfig mc;
    mc.dim = 16;
    mc.hidden = 4;
    mc.buckets = 1 << 12;
    DetectorParams params = DetectorParams::init(mc, 2);
    Vec a = encode("listen carefully", params);
    Vec b = encode("listen carefully", params);
    CHECK(a == b);
    Vec c = encode("silent carefully", params);
    double diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) diff += std::abs(a[k] - c[k]);
    CHECK(diff > 0.0);
}

TEST_CASE("short texts still produce a bucket") {
    ModelConfig mc = tiny_config();
    CHECK(encode_buckets("ab", mc).size() == 1);
    CHECK(encode_buckets("a", mc).size() == 1);
    CHECK(encode_buckets("", mc).empty());
}

TEST_CASE("classify with zero weights is the coin flip") {
    ModelConfig mc = tiny_config();
    DetectorParams p = zero_head_params(mc);
    Vec probs = classify(p, Vec(static_cast<std::size_t>(mc.dim), 0.0));
    CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(probs[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("classify probabilities sum to one and argmax is shift invariant") {
    ModelConfig mc = tiny_config();
    DetectorParams p = DetectorParams::init(mc, 5);
    Rng rng = make_rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        Vec f(static_cast<std::size_t>(mc.dim));
        for (double& v : f) v = 2.0 * rand_normal(rng);
        Vec probs = classify(p, f);
        CHECK(probs[0] + probs[1] == doctest::Approx(1.0).epsilon(1e-9));
        int argmax_before = probs[1] > probs[0] ? 1 : 0;
        DetectorParams shifted = p;
        shifted.head_out_b[0] += 3.7;
        shifted.head_out_b[1] += 3.7;
        Vec probs2 = classify(shifted, f);
        int argmax_after = probs2[1] > probs2[0] ? 1 : 0;
        CHECK(argmax_before == argmax_after);
    }
}

TEST_CASE("head_feature_gradient matches finite differences on the logit") {
    ModelConfig mc = tiny_config();
    DetectorParams p = DetectorParams::init(mc, 7);
    Rng rng = make_rng(8);
    Vec f(static_cast<std::size_t>(mc.dim));
    for (double& v : f) v = rand_normal(rng);
    for (int y = 0; y < 2; ++y) {
        Vec g = head_feature_gradient(p, f, y);
        for (int k = 0; k < mc.dim; ++k) {
            const double eps = 1e-6;
            Vec hi = f, lo = f;
            hi[static_cast<std::size_t>(k)] += eps;
            lo[static_cast<std::size_t>(k)] -= eps;
            double fd = (head_logits(p, hi)[static_cast<std::size_t>(y)] -
                         head_logits(p, lo)[static_cast<std::size_t>(y)]) /
                        (2 * eps);
            CHECK(std::abs(fd - g[static_cast<std::size_t>(k)]) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

// Full-pipeline gradient check: all four loss terms active, gated features,
// memory alignment, fixed masks. Every parameter group is compared against
// central finite differences.
TEST_CASE("batch gradients match central finite differences across all parameter groups") {
    ModelConfig mc = tiny_config();
    Rng rng = make_rng(31);

    DetectorParams params = DetectorParams::init(mc, 13);
    StrategyFlags flags;  // full
    TrainSettings settings;
    settings.weights.lambda = 0.3;
    settings.weights.gamma = 0.7;
    settings.ig_steps = 8;

    std::vector<PreparedSample> samples;
    samples.push_back(make_ps("a", 1, random_buckets(rng, mc.buckets), random_buckets(rng, mc.buckets)));
    samples.push_back(make_ps("b", 0, random_buckets(rng, mc.buckets), random_buckets(rng, mc.buckets)));
    samples.push_back(make_ps("c", 1, random_buckets(rng, mc.buckets)));  // no aux for this one
    std::vector<const PreparedSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);

    std::vector<Mask> masks;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Mask m(static_cast<std::size_t>(mc.dim));
        for (auto& b : m) b = static_cast<std::uint8_t>(rng() % 2);
        masks.push_back(m);
    }

    MemoryBuffer buffer;
    buffer.capacity_per_domain = 4;
    for (int dom = 0; dom < 2; ++dom) {
        std::vector<MemoryEntry> entries;
        for (int j = 0; j < 2; ++j) {
            MemoryEntry e;
            e.sample = make_ps("m" + std::to_string(dom) + std::to_string(j), j % 2,
                               random_buckets(rng, mc.buckets), random_buckets(rng, mc.buckets));
            e.f_old.resize(static_cast<std::size_t>(mc.dim));
            for (double& v : e.f_old) v = rand_normal(rng);
            entries.push_back(std::move(e));
        }
        buffer.add_domain("dom" + std::to_string(dom), std::move(entries));
    }

    TermFlags terms;
    terms.cls = terms.more = terms.less = terms.align = true;

    auto loss_total = [&]() {
        return batch_loss_and_gradients(batch, &masks, params, settings, terms, flags, &buffer)
            .report.total;
    };
    BatchLoss analytic =
        batch_loss_and_gradients(batch, &masks, params, settings, terms, flags, &buffer);

    const double eps = 1e-4;
    int checked = 0;
    auto check_param = [&](double* p, double analytic_grad) {
        double saved = *p;
        *p = saved + eps;
        double hi = loss_total();
        *p = saved - eps;
        double lo = loss_total();
        *p = saved;
        double fd = (hi - lo) / (2 * eps);
        double denom = std::max({1e-6, std::abs(fd), std::abs(analytic_grad)});
        CHECK(std::abs(fd - analytic_grad) / denom <= 1e-3);
        ++checked;
    };

    for (std::size_t i = 0; i < params.head_hidden_w.data.size(); ++i) {
        check_param(&params.head_hidden_w.data[i], analytic.grads.head.hidden_w.data[i]);
    }
    for (std::size_t i = 0; i < params.head_hidden_b.size(); ++i) {
        check_param(&params.head_hidden_b[i], analytic.grads.head.hidden_b[i]);
    }
    for (std::size_t i = 0; i < params.head_out_w.data.size(); ++i) {
        check_param(&params.head_out_w.data[i], analytic.grads.head.out_w.data[i]);
    }
    for (std::size_t i = 0; i < params.head_out_b.size(); ++i) {
        check_param(&params.head_out_b[i], analytic.grads.head.out_b[i]);
    }
    for (std::size_t i = 0; i < params.gate.conv_kernel.size(); ++i) {
        check_param(&params.gate.conv_kernel[i], analytic.grads.gate.conv_kernel[i]);
    }
    for (std::size_t i = 0; i < params.gate.gate_bias.size(); ++i) {
        check_param(&params.gate.gate_bias[i], analytic.grads.gate.gate_bias[i]);
    }
    for (std::size_t i = 0; i < params.gate.gate_weights.data.size(); ++i) {
        check_param(&params.gate.gate_weights.data[i], analytic.grads.gate.gate_weights.data[i]);
    }
    for (const auto& [row, g] : analytic.grads.embedding) {
        for (int k = 0; k < mc.dim; ++k) {
            check_param(&params.embedding.at(static_cast<int>(row), k), g[static_cast<std::size_t>(k)]);
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("a separable batch is learned to perfect accuracy") {
    ModelConfig mc = tiny_config();
    DetectorParams params = DetectorParams::init(mc, 3);
    AdamW opt(params);
    TrainSettings settings;
    StrategyFlags flags = StrategyFlags::stream();
    std::vector<PreparedSample> samples = {
        make_ps("a", 0, {1, 2, 3}),
        make_ps("b", 1, {10, 11, 12}),
    };
    std::vector<const PreparedSample*> batch = {&samples[0], &samples[1]};
    TermFlags terms;
    terms.cls = true;
    for (int step = 0; step < 200; ++step) {
        train_step(batch, nullptr, params, opt, settings, terms, flags, nullptr);
    }
    CHECK(evaluate_accuracy(samples, params, flags, 0.5) == 1.0);
}

TEST_CASE("loss decreases over the first 10 steps on a fixed toy batch") {
    ModelConfig mc = tiny_config();
    DetectorParams params = DetectorParams::init(mc, 4);
    AdamW opt(params);
    TrainSettings settings;
    StrategyFlags flags = StrategyFlags::stream();
    std::vector<PreparedSample> samples = {
        make_ps("a", 0, {1, 2, 3, 7}),
        make_ps("b", 1, {9, 11, 12}),
        make_ps("c", 1, {9, 13, 12}),
    };
    std::vector<const PreparedSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);
    TermFlags terms;
    terms.cls = true;
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 10; ++step) {
        auto report = train_step(batch, nullptr, params, opt, settings, terms, flags, nullptr);
        if (step == 0) first = report.total;
        last = report.total;
    }
    CHECK(last < first);
}

TEST_CASE("lambda = gamma = 0 follows the plain CE trajectory bitwise") {
    ModelConfig mc = tiny_config();
    Rng rng = make_rng(17);
    std::vector<PreparedSample> samples;
    for (int i = 0; i < 6; ++i) {
        samples.push_back(make_ps("s" + std::to_string(i), i % 2, random_buckets(rng, mc.buckets),
                                  random_buckets(rng, mc.buckets)));
    }
    std::vector<const PreparedSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);

    MemoryBuffer buffer;
    {
        std::vector<MemoryEntry> entries(1);
        entries[0].sample = make_ps("m", 1, random_buckets(rng, mc.buckets));
        entries[0].f_old.assign(static_cast<std::size_t>(mc.dim), 0.25);
        buffer.add_domain("d", std::move(entries));
    }

    StrategyFlags flags;  // full
    TermFlags all_terms;
    all_terms.cls = all_terms.more = all_terms.less = all_terms.align = true;
    TermFlags cls_only;
    cls_only.cls = true;

    TrainSettings zeroed;
    zeroed.weights.lambda = 0.0;
    zeroed.weights.gamma = 0.0;

    DetectorParams pa = DetectorParams::init(mc, 99);
    DetectorParams pb = DetectorParams::init(mc, 99);
    AdamW oa(pa), ob(pb);
    for (int step = 0; step < 5; ++step) {
        train_step(batch, nullptr, pa, oa, zeroed, all_terms, flags, &buffer);
        train_step(batch, nullptr, pb, ob, zeroed, cls_only, flags, nullptr);
    }
    CHECK(pa.embedding.data == pb.embedding.data);
    CHECK(pa.head_hidden_w.data == pb.head_hidden_w.data);
    CHECK(pa.head_out_w.data == pb.head_out_w.data);
    CHECK(pa.gate.gate_weights.data == pb.gate.gate_weights.data);
}

TEST_CASE("training with a fixed seed is bitwise reproducible") {
    ModelConfig mc = tiny_config();
    auto run = [&]() {
        DetectorParams params = DetectorParams::init(mc, 42);
        AdamW opt(params);
        TrainSettings settings;
        StrategyFlags flags;
        Rng rng = make_rng(1);
        std::vector<PreparedSample> samples;
        for (int i = 0; i < 8; ++i) {
            samples.push_back(make_ps("s" + std::to_string(i), i % 2, random_buckets(rng, mc.buckets),
                                      random_buckets(rng, mc.buckets)));
        }
        std::vector<const PreparedSample*> batch;
        for (const auto& s : samples) batch.push_back(&s);
        TermFlags terms;
        terms.cls = terms.more = terms.less = true;
        for (int step = 0; step < 8; ++step) {
            train_step(batch, nullptr, params, opt, settings, terms, flags, nullptr);
        }
        return params;
    };
    DetectorParams a = run();
    DetectorParams b = run();
    CHECK(std::memcmp(a.embedding.data.data(), b.embedding.data.data(),
                      a.embedding.data.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.head_hidden_w.data.data(), b.head_hidden_w.data.data(),
                      a.head_hidden_w.data.size() * sizeof(double)) == 0);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    ModelConfig mc = tiny_config();
    DetectorParams params = DetectorParams::init(mc, 3);
    for (double& v : params.head_out_b) v = std::numeric_limits<double>::quiet_NaN();
    AdamW opt(params);
    TrainSettings settings;
    StrategyFlags flags = StrategyFlags::stream();
    std::vector<PreparedSample> samples = {make_ps("a", 0, {1, 2, 3})};
    std::vector<const PreparedSample*> batch = {&samples[0]};
    TermFlags terms;
    terms.cls = true;
    CHECK_THROWS_AS(train_step(batch, nullptr, params, opt, settings, terms, flags, nullptr),
                    TrainingError);
}

TEST_CASE("evaluate_accuracy matches a hand recount and rejects empty splits") {
    ModelConfig mc = tiny_config();
    DetectorParams params = DetectorParams::init(mc, 23);
    StrategyFlags flags = StrategyFlags::stream();
    Rng rng = make_rng(40);
    std::vector<PreparedSample> samples;
    for (int i = 0; i < 10; ++i) {
        samples.push_back(make_ps("s" + std::to_string(i), static_cast<int>(rng() % 2),
                                  random_buckets(rng, mc.buckets)));
    }
    int correct = 0;
    for (const auto& s : samples) {
        Vec f = encode_from_buckets(s.text_buckets, params.embedding);
        Vec p = classify(params, f);
        int pred = p[1] > p[0] ? 1 : 0;
        if (pred == s.label) ++correct;
    }
    CHECK(evaluate_accuracy(samples, params, flags, 0.5) ==
          doctest::Approx(correct / 10.0).epsilon(1e-12));
    CHECK_THROWS_AS(evaluate_accuracy({}, params, flags, 0.5), DataError);
}

TEST_CASE("an uninformative model scores about 50% on balanced random labels") {
    ModelConfig mc = tiny_config();
    DetectorParams params = DetectorParams::init(mc, 77);
    StrategyFlags flags = StrategyFlags::stream();
    Rng rng = make_rng(3);
    std::vector<PreparedSample> samples;
    for (int i = 0; i < 1000; ++i) {
        samples.push_back(make_ps("s" + std::to_string(i), i % 2, random_buckets(rng, mc.buckets)));
    }
    double acc = evaluate_accuracy(samples, params, flags, 0.5);
    CHECK(acc > 0.4);
    CHECK(acc < 0.6);
}

TEST_CASE("checkpoint round trip restores parameters, config and memories") {
    namespace fs = std::filesystem;
    ModelConfig mc = tiny_config();
    DetectorParams params = DetectorParams::init(mc, 55);
    MemoryBuffer buffer;
    buffer.capacity_per_domain = 2;
    {
        std::vector<MemoryEntry> entries(1);
        entries[0].sample = make_ps("mem-1", 1, {4, 5}, {6});
        entries[0].sample.domain = "insert";
        entries[0].f_old = {0.5, -1.5, 0.25, 0.0, 3.0, -0.125};
        buffer.add_domain("insert", std::move(entries));
    }
    nlohmann::json config{{"seed", 7}, {"note", "test"}};
    auto path = (fs::temp_directory_path() / "contiguard_ckpt_test.bin").string();
    save_checkpoint(path, params, config, "rngstate", buffer);
    Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.params.embedding.data == params.embedding.data);
    CHECK(loaded.params.head_hidden_w.data == params.head_hidden_w.data);
    CHECK(loaded.params.gate.conv_kernel == params.gate.conv_kernel);
    CHECK(loaded.config.at("seed") == 7);
    CHECK(loaded.rng_state == "rngstate");
    REQUIRE(loaded.memories.domains.size() == 1);
    CHECK(loaded.memories.domains[0].first == "insert");
    CHECK(loaded.memories.domains[0].second[0].f_old == buffer.domains[0].second[0].f_old);
    CHECK(loaded.memories.domains[0].second[0].sample.text_buckets ==
          std::vector<std::uint32_t>{4, 5});
    fs::remove(path);
}
