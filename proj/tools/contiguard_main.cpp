// Command-line driver: dataset construction, enrichment, continual training,
// evaluation, ablations, memory sweeps, and report generation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "contiguard/checkpoint.hpp"
#include "contiguard/config.hpp"
#include "contiguard/corpus.hpp"
#include "contiguard/errors.hpp"
#include "contiguard/harness.hpp"
#include "contiguard/rng.hpp"

namespace fs = std::filesystem;
using namespace contiguard;
using json = nlohmann::json;

namespace {

struct ConfigCli {
    std::string config_file;
    std::vector<std::string> sets;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "flat key = value config file");
        cmd->add_option("--set", sets, "override a config key (key=value), repeatable");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_file.empty()) cfg.load_file(config_file);
        for (const auto& kv : sets) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kv);
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        return cfg;
    }
};

void write_resolved_config(const RunConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream kv(dir / "config.resolved");
    kv << cfg.to_key_values();
    std::ofstream js(dir / "config.json");
    js << cfg.to_json().dump(2) << "\n";
}

std::vector<PerturbationKind> resolve_order(const std::string& order_name, const RunConfig& cfg) {
    auto kinds = cfg.kind_list();
    if (order_name.empty() || order_name == "default" || order_name == "identity") return kinds;
    for (auto& [name, order] : default_orders(kinds, cfg.seed)) {
        if (name == order_name) return order;
    }
    // Otherwise a comma list of kind names.
    RunConfig tmp = cfg;
    tmp.kinds = order_name;
    return tmp.kind_list();
}

std::vector<LabeledText> load_dataset(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw ConfigError("config key 'data_path' is required");
    return read_jsonl(cfg.data_path);
}

std::unique_ptr<AuxiliaryProvider> make_provider(const RunConfig& cfg, const Lexicons& lexicons) {
    auto provider = std::make_unique<AuxiliaryProvider>(lexicons, cfg.llm_config());
    if (!cfg.aux_cache_path.empty()) provider->cache().load_jsonl(cfg.aux_cache_path);
    return provider;
}

void save_run(const fs::path& dir, const RunConfig& cfg, const RunResult& result) {
    fs::create_directories(dir);
    write_moment_logs((dir / "moments.jsonl").string(), result.moments);
    write_critical_sets((dir / "critical.jsonl").string(), result.critical);
    std::ostringstream rng_state;
    rng_state << make_rng(cfg.seed);
    save_checkpoint((dir / "checkpoint.ckpt").string(), result.params, cfg.to_json(),
                    rng_state.str(), result.memories);
    write_resolved_config(cfg, dir);
}

int cmd_build_dataset(const RunConfig& cfg, int synthetic) {
    Lexicons lexicons = Lexicons::load(cfg.lexicon_dir);
    std::vector<LabeledText> raw;
    if (synthetic > 0) {
        raw = synthesize_raw(synthetic, cfg.seed, lexicons, cfg.noise_fraction);
    } else {
        raw = load_dataset(cfg);
    }
    DictionarySpellChecker checker = DictionarySpellChecker::from_file(cfg.lexicon_dir + "/dictionary.txt");
    CleanStats stats;
    auto cleaned = clean(raw, checker, &stats);
    std::cerr << "clean: " << raw.size() << " -> " << cleaned.size() << " (private "
              << stats.dropped_private << ", repeated " << stats.dropped_repeated << ", unknown "
              << stats.dropped_unknown << ", stripped tokens " << stats.tokens_stripped << ")\n";
    auto balanced = rebalance(cleaned, cfg.seed);
    std::cerr << "rebalance: " << balanced.size() << " samples\n";

    LexiconRatioScorer scorer(lexicons);
    ThresholdDetector detector(scorer, cfg.attack_threshold);
    DynescapeOptions options;
    options.kinds = cfg.kind_list();
    options.per_kind_quota = cfg.quota;
    options.seed = cfg.seed;
    options.perturb = cfg.perturb_config(options.kinds.front());
    auto dataset = build_dynescape(balanced, detector, lexicons, options);

    fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    write_jsonl((out_dir / "dataset.jsonl").string(), dataset);
    write_resolved_config(cfg, out_dir);
    std::cerr << "wrote " << dataset.size() << " samples to " << (out_dir / "dataset.jsonl") << "\n";
    return kExitOk;
}

int cmd_enrich(const RunConfig& cfg, const std::string& out_path) {
    Lexicons lexicons = Lexicons::load(cfg.lexicon_dir);
    auto dataset = load_dataset(cfg);
    auto provider = make_provider(cfg, lexicons);
    for (const auto& s : dataset) provider->fetch(s.id, s.text);
    std::string out = out_path.empty() ? (cfg.data_path + ".aux.jsonl") : out_path;
    provider->cache().save_jsonl(out);
    std::cerr << "enriched " << provider->cache().size() << " samples -> " << out << " ("
              << provider->network_calls() << " network calls)\n";
    return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& order_name) {
    Lexicons lexicons = Lexicons::load(cfg.lexicon_dir);
    auto dataset = load_dataset(cfg);
    auto order = resolve_order(order_name, cfg);
    auto provider = make_provider(cfg, lexicons);
    auto domains = prepare_domains(dataset, order, cfg.model_config(), *provider);
    StrategyFlags flags = cfg.strategy_flags();
    std::string order_id = order_name.empty() ? "identity" : order_name;
    RunResult result = run_sequence(domains, cfg, flags, order_id, flags.label());
    fs::path dir = fs::path(cfg.out_dir) / (flags.label() + "-" + order_id + "-seed" +
                                            std::to_string(cfg.seed));
    save_run(dir, cfg, result);
    std::cout << "final averaged accuracy: " << result.moments.back().averaged_accuracy << "\n";
    std::cout << "run directory: " << dir << "\n";
    return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& split) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Lexicons lexicons = Lexicons::load(cfg.lexicon_dir);
    auto dataset = load_dataset(cfg);
    auto provider = make_provider(cfg, lexicons);
    auto order = cfg.kind_list();
    auto domains = prepare_domains(dataset, order, ckpt.params.config, *provider);
    StrategyFlags flags = cfg.strategy_flags();
    double sum = 0.0;
    for (const auto& d : domains) {
        const auto& samples = split == "train" ? d.train : (split == "valid" ? d.valid : d.test);
        double acc = evaluate_accuracy(samples, ckpt.params, flags, cfg.coop_alpha);
        std::cout << to_string(d.kind) << " " << split << " accuracy: " << acc << "\n";
        sum += acc;
    }
    std::cout << "mean accuracy: " << sum / static_cast<double>(domains.size()) << "\n";
    return kExitOk;
}

int cmd_ablate(const RunConfig& cfg, const std::string& flag_name, const std::string& order_name) {
    Lexicons lexicons = Lexicons::load(cfg.lexicon_dir);
    auto dataset = load_dataset(cfg);
    auto order = resolve_order(order_name, cfg);
    auto provider = make_provider(cfg, lexicons);
    auto domains = prepare_domains(dataset, order, cfg.model_config(), *provider);
    std::string order_id = order_name.empty() ? "identity" : order_name;

    std::vector<std::pair<std::string, StrategyFlags>> variants;
    if (flag_name == "all") {
        variants.emplace_back("full", StrategyFlags::full());
        variants.emplace_back("stream", StrategyFlags::stream());
        for (const auto& name : StrategyFlags::ablation_names()) {
            variants.emplace_back(name, *StrategyFlags::ablation(name));
        }
    } else if (flag_name == "stream") {
        variants.emplace_back("stream", StrategyFlags::stream());
    } else {
        auto f = StrategyFlags::ablation(flag_name);
        if (!f) throw ConfigError("unknown ablation flag: " + flag_name);
        variants.emplace_back(flag_name, *f);
    }
    for (const auto& [name, flags] : variants) {
        RunResult result = run_sequence(domains, cfg, flags, order_id, name);
        fs::path dir = fs::path(cfg.out_dir) / (name + "-" + order_id + "-seed" +
                                                std::to_string(cfg.seed));
        save_run(dir, cfg, result);
        std::cout << name << " final averaged accuracy: " << result.moments.back().averaged_accuracy
                  << "\n";
    }
    return kExitOk;
}

int cmd_sweep_memory(const RunConfig& cfg, const std::string& ks_csv, const std::string& order_name) {
    Lexicons lexicons = Lexicons::load(cfg.lexicon_dir);
    auto dataset = load_dataset(cfg);
    auto order = resolve_order(order_name, cfg);
    auto provider = make_provider(cfg, lexicons);
    auto domains = prepare_domains(dataset, order, cfg.model_config(), *provider);
    std::string order_id = order_name.empty() ? "identity" : order_name;

    std::vector<int> ks;
    std::stringstream ss(ks_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) ks.push_back(std::stoi(item));
    }
    if (ks.empty()) throw ConfigError("--k lists no values");
    auto points = sweep_memory(domains, cfg, ks, order_id);
    fs::path dir = fs::path(cfg.out_dir) / ("sweep-" + order_id + "-seed" + std::to_string(cfg.seed));
    fs::create_directories(dir);
    std::vector<MomentLog> all;
    for (const auto& p : points) {
        all.insert(all.end(), p.moments.begin(), p.moments.end());
        std::cout << "k=" << p.k << " final averaged accuracy: "
                  << p.moments.back().averaged_accuracy << "\n";
    }
    write_moment_logs((dir / "moments.jsonl").string(), all);
    std::ofstream csv(dir / "sweep.csv");
    csv << moments_table_csv(all);
    write_resolved_config(cfg, dir);
    return kExitOk;
}

int cmd_report(const std::string& results_dir, const std::string& out_dir) {
    std::vector<MomentLog> all_moments;
    std::vector<std::pair<std::string, std::vector<CriticalFeatureSet>>> run_criticals;
    for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename() == "moments.jsonl") {
            auto logs = read_moment_logs(entry.path().string());
            all_moments.insert(all_moments.end(), logs.begin(), logs.end());
        } else if (entry.path().filename() == "critical.jsonl") {
            run_criticals.emplace_back(entry.path().parent_path().filename().string(),
                                       read_critical_sets(entry.path().string()));
        }
    }
    if (all_moments.empty()) throw DataError("no moments.jsonl found under " + results_dir);
    fs::path out(out_dir.empty() ? results_dir : out_dir);
    fs::create_directories(out);
    {
        std::ofstream f(out / "moments_table.csv");
        f << moments_table_csv(all_moments);
    }
    {
        std::ofstream f(out / "moments_table.md");
        f << moments_table_markdown(all_moments);
    }
    for (const auto& [run_name, sets] : run_criticals) {
        std::ofstream c(out / ("retention-" + run_name + ".csv"));
        c << retention_matrix_csv(sets);
        std::ofstream m(out / ("retention-" + run_name + ".md"));
        m << retention_matrix_markdown(sets);
    }
    std::cout << "report written to " << out << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ContiGuard: continual toxicity detection against evolving evasive perturbations"};
    app.require_subcommand(0, 1);
    bool print_config = false;
    app.add_flag("--print-config", print_config, "print default configuration and exit");

    ConfigCli build_cfg;
    int synthetic = 0;
    std::string raw_path;
    auto* build = app.add_subcommand("build-dataset", "construct the perturbation-wise dataset");
    build_cfg.attach(build);
    build->add_option("--raw", raw_path, "raw JSONL corpus path");
    build->add_option("--synthetic", synthetic, "synthesize N raw samples instead of --raw");
    std::string build_out, build_kinds, build_quota, build_seed;
    build->add_option("--out", build_out, "output directory");
    build->add_option("--kinds", build_kinds, "comma list of perturbation kinds");
    build->add_option("--quota", build_quota, "samples per kind");
    build->add_option("--seed", build_seed, "RNG seed");

    ConfigCli enrich_cfg;
    std::string enrich_data, enrich_out, enrich_mode;
    auto* enrich_cmd = app.add_subcommand("enrich", "fetch auxiliary information for a dataset");
    enrich_cfg.attach(enrich_cmd);
    enrich_cmd->add_option("--data", enrich_data, "dataset JSONL");
    enrich_cmd->add_option("--out", enrich_out, "output auxiliary cache JSONL");
    enrich_cmd->add_option("--mode", enrich_mode, "stub or live");

    ConfigCli train_cfg;
    std::string train_order, train_data, train_out, train_seed;
    auto* train_cmd = app.add_subcommand("train", "continual training over a domain order");
    train_cfg.attach(train_cmd);
    train_cmd->add_option("--order", train_order, "identity|reverse|shuffle1|shuffle2 or kind list");
    train_cmd->add_option("--data", train_data, "dataset JSONL");
    train_cmd->add_option("--out", train_out, "output directory");
    train_cmd->add_option("--seed", train_seed, "RNG seed");

    ConfigCli eval_cfg;
    std::string eval_ckpt, eval_data, eval_split = "test";
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint per domain");
    eval_cfg.attach(eval_cmd);
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "dataset JSONL");
    eval_cmd->add_option("--split", eval_split, "train|valid|test (default test)");

    ConfigCli ablate_cfg;
    std::string ablate_flag = "all", ablate_order, ablate_data, ablate_out, ablate_seed;
    auto* ablate_cmd = app.add_subcommand("ablate", "run ablation variants");
    ablate_cfg.attach(ablate_cmd);
    ablate_cmd->add_option("--flag", ablate_flag, "wo_aux|wo_coop|wo_disc|wo_more|wo_less|wo_mem|wo_align|stream|all");
    ablate_cmd->add_option("--order", ablate_order, "domain order");
    ablate_cmd->add_option("--data", ablate_data, "dataset JSONL");
    ablate_cmd->add_option("--out", ablate_out, "output directory");
    ablate_cmd->add_option("--seed", ablate_seed, "RNG seed");

    ConfigCli sweep_cfg;
    std::string sweep_ks = "0,2,4,8", sweep_order, sweep_data, sweep_out, sweep_seed;
    auto* sweep_cmd = app.add_subcommand("sweep-memory", "memory-size sweep");
    sweep_cfg.attach(sweep_cmd);
    sweep_cmd->add_option("--k", sweep_ks, "comma list of memory sizes");
    sweep_cmd->add_option("--order", sweep_order, "domain order");
    sweep_cmd->add_option("--data", sweep_data, "dataset JSONL");
    sweep_cmd->add_option("--out", sweep_out, "output directory");
    sweep_cmd->add_option("--seed", sweep_seed, "RNG seed");

    std::string report_results, report_out;
    auto* report_cmd = app.add_subcommand("report", "aggregate moment logs into tables");
    report_cmd->add_option("--results", report_results, "results directory")->required();
    report_cmd->add_option("--out", report_out, "output directory (default: results dir)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_config) {
            RunConfig cfg;
            std::cout << cfg.to_key_values();
            return kExitOk;
        }
        if (build->parsed()) {
            RunConfig cfg = build_cfg.resolve();
            if (!raw_path.empty()) cfg.data_path = raw_path;
            if (!build_out.empty()) cfg.out_dir = build_out;
            if (!build_kinds.empty()) cfg.kinds = build_kinds;
            if (!build_quota.empty()) cfg.set("quota", build_quota);
            if (!build_seed.empty()) cfg.set("seed", build_seed);
            if (synthetic <= 0 && cfg.data_path.empty()) {
                throw ConfigError("build-dataset requires --raw or --synthetic");
            }
            return cmd_build_dataset(cfg, synthetic);
        }
        if (enrich_cmd->parsed()) {
            RunConfig cfg = enrich_cfg.resolve();
            if (!enrich_data.empty()) cfg.data_path = enrich_data;
            if (!enrich_mode.empty()) cfg.llm_mode = enrich_mode;
            return cmd_enrich(cfg, enrich_out);
        }
        if (train_cmd->parsed()) {
            RunConfig cfg = train_cfg.resolve();
            if (!train_data.empty()) cfg.data_path = train_data;
            if (!train_out.empty()) cfg.out_dir = train_out;
            if (!train_seed.empty()) cfg.set("seed", train_seed);
            return cmd_train(cfg, train_order);
        }
        if (eval_cmd->parsed()) {
            RunConfig cfg = eval_cfg.resolve();
            if (!eval_data.empty()) cfg.data_path = eval_data;
            return cmd_evaluate(cfg, eval_ckpt, eval_split);
        }
        if (ablate_cmd->parsed()) {
            RunConfig cfg = ablate_cfg.resolve();
            if (!ablate_data.empty()) cfg.data_path = ablate_data;
            if (!ablate_out.empty()) cfg.out_dir = ablate_out;
            if (!ablate_seed.empty()) cfg.set("seed", ablate_seed);
            return cmd_ablate(cfg, ablate_flag, ablate_order);
        }
        if (sweep_cmd->parsed()) {
            RunConfig cfg = sweep_cfg.resolve();
            if (!sweep_data.empty()) cfg.data_path = sweep_data;
            if (!sweep_out.empty()) cfg.out_dir = sweep_out;
            if (!sweep_seed.empty()) cfg.set("seed", sweep_seed);
            return cmd_sweep_memory(cfg, sweep_ks, sweep_order);
        }
        if (report_cmd->parsed()) {
            return cmd_report(report_results, report_out);
        }
        std::cout << app.help();
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
