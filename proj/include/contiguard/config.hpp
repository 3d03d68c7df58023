#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "contiguard/model.hpp"
#include "contiguard/perturb.hpp"
#include "contiguard/train.hpp"

namespace contiguard {

// Flat key-value run configuration. Every field is settable from a config
// file (`key = value` lines) or a CLI override; the resolved config is
// serialized into every results manifest.
struct RunConfig {
    // model
    int dim = 64;
    int hidden = 32;
    int buckets = 1 << 16;
    int max_chars = 360;
    bool gate_diagonal = false;

    // training
    double learning_rate = 2e-3;
    double weight_decay = 0.01;
    int batch_size = 16;
    int max_epochs = 20;
    int patience = 5;
    std::uint64_t seed = 0;
    double lambda = 0.1;
    double gamma = 1.0;
    int memory_k = 8;
    int memory_fresh_ratio = 4;
    int ig_steps = 20;
    int relearn_cycles = 3;
    double coop_alpha = 0.5;

    // strategy switches (ablations toggle these)
    bool use_aux = true;
    bool use_coop = true;
    bool use_more = true;
    bool use_less = true;
    bool use_mem = true;
    bool use_align = true;

    // perturbation + dataset construction
    double rate = 0.2;
    int edits_per_token = 1;
    int distract_word_count = 5;
    int quota = 500;
    double attack_threshold = 0.12;
    int synthetic_samples = 8000;
    double noise_fraction = 0.0;
    std::string kinds = "insert,repeat,swap,homoglyph,maskword";

    // paths
    std::string lexicon_dir = CONTIGUARD_DATA_DIR;
    std::string data_path;
    std::string out_dir = "runs";
    std::string aux_cache_path;

    // llm client
    std::string llm_mode = "stub";  // stub | live
    std::string llm_model = "gpt-4o-mini";
    int llm_retries = 2;

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);  // throws ConfigError
    nlohmann::json to_json() const;
    std::string to_key_values() const;

    ModelConfig model_config() const;
    TrainSettings train_settings() const;
    StrategyFlags strategy_flags() const;
    PerturbConfig perturb_config(PerturbationKind kind) const;
    std::vector<PerturbationKind> kind_list() const;
    LlmClientConfig llm_config() const;
};

}  // namespace contiguard
