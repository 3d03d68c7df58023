#include "contiguard/config.hpp"

#include <fstream>
#include <sstream>

#include "contiguard/errors.hpp"

namespace contiguard {

namespace {

enum class FieldType { Int, U64, Double, Bool, Str };

struct Field {
    const char* name;
    FieldType type;
    void* ptr;
};

std::vector<Field> fields(RunConfig& c) {
    return {
        {"dim", FieldType::Int, &c.dim},
        {"hidden", FieldType::Int, &c.hidden},
        {"buckets", FieldType::Int, &c.buckets},
        {"max_chars", FieldType::Int, &c.max_chars},
        {"gate_diagonal", FieldType::Bool, &c.gate_diagonal},
        {"learning_rate", FieldType::Double, &c.learning_rate},
        {"weight_decay", FieldType::Double, &c.weight_decay},
        {"batch_size", FieldType::Int, &c.batch_size},
        {"max_epochs", FieldType::Int, &c.max_epochs},
        {"patience", FieldType::Int, &c.patience},
        {"seed", FieldType::U64, &c.seed},
        {"lambda", FieldType::Double, &c.lambda},
        {"gamma", FieldType::Double, &c.gamma},
        {"memory_k", FieldType::Int, &c.memory_k},
        {"memory_fresh_ratio", FieldType::Int, &c.memory_fresh_ratio},
        {"ig_steps", FieldType::Int, &c.ig_steps},
        {"relearn_cycles", FieldType::Int, &c.relearn_cycles},
        {"coop_alpha", FieldType::Double, &c.coop_alpha},
        {"use_aux", FieldType::Bool, &c.use_aux},
        {"use_coop", FieldType::Bool, &c.use_coop},
        {"use_more", FieldType::Bool, &c.use_more},
        {"use_less", FieldType::Bool, &c.use_less},
        {"use_mem", FieldType::Bool, &c.use_mem},
        {"use_align", FieldType::Bool, &c.use_align},
        {"rate", FieldType::Double, &c.rate},
        {"edits_per_token", FieldType::Int, &c.edits_per_token},
        {"distract_word_count", FieldType::Int, &c.distract_word_count},
        {"quota", FieldType::Int, &c.quota},
        {"attack_threshold", FieldType::Double, &c.attack_threshold},
        {"synthetic_samples", FieldType::Int, &c.synthetic_samples},
        {"noise_fraction", FieldType::Double, &c.noise_fraction},
        {"kinds", FieldType::Str, &c.kinds},
        {"lexicon_dir", FieldType::Str, &c.lexicon_dir},
        {"data_path", FieldType::Str, &c.data_path},
        {"out_dir", FieldType::Str, &c.out_dir},
        {"aux_cache_path", FieldType::Str, &c.aux_cache_path},
        {"llm_mode", FieldType::Str, &c.llm_mode},
        {"llm_model", FieldType::Str, &c.llm_model},
        {"llm_retries", FieldType::Int, &c.llm_retries},
    };
}

std::string strip_quotes(std::string v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for key '" + key + "': " + v);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw_value) {
    std::string value = strip_quotes(trim(raw_value));
    for (auto& f : fields(*this)) {
        if (key != f.name) continue;
        try {
            switch (f.type) {
                case FieldType::Int:
                    *static_cast<int*>(f.ptr) = std::stoi(value);
                    return;
                case FieldType::U64:
                    *static_cast<std::uint64_t*>(f.ptr) = std::stoull(value);
                    return;
                case FieldType::Double:
                    *static_cast<double*>(f.ptr) = std::stod(value);
                    return;
                case FieldType::Bool:
                    *static_cast<bool*>(f.ptr) = parse_bool(value, key);
                    return;
                case FieldType::Str:
                    *static_cast<std::string*>(f.ptr) = value;
                    return;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("invalid value for key '" + key + "': " + value);
        }
    }
    throw ConfigError("unknown config key: " + key);
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    for (auto& f : fields(const_cast<RunConfig&>(*this))) {
        switch (f.type) {
            case FieldType::Int:
                j[f.name] = *static_cast<int*>(f.ptr);
                break;
            case FieldType::U64:
                j[f.name] = *static_cast<std::uint64_t*>(f.ptr);
                break;
            case FieldType::Double:
                j[f.name] = *static_cast<double*>(f.ptr);
                break;
            case FieldType::Bool:
                j[f.name] = *static_cast<bool*>(f.ptr);
                break;
            case FieldType::Str:
                j[f.name] = *static_cast<std::string*>(f.ptr);
                break;
        }
    }
    return j;
}

std::string RunConfig::to_key_values() const {
    std::ostringstream out;
    for (auto& f : fields(const_cast<RunConfig&>(*this))) {
        out << f.name << " = ";
        switch (f.type) {
            case FieldType::Int:
                out << *static_cast<int*>(f.ptr);
                break;
            case FieldType::U64:
                out << *static_cast<std::uint64_t*>(f.ptr);
                break;
            case FieldType::Double:
                out << *static_cast<double*>(f.ptr);
                break;
            case FieldType::Bool:
                out << (*static_cast<bool*>(f.ptr) ? "true" : "false");
                break;
            case FieldType::Str:
                out << *static_cast<std::string*>(f.ptr);
                break;
        }
        out << "\n";
    }
    return out.str();
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.dim = dim;
    m.hidden = hidden;
    m.buckets = buckets;
    m.max_chars = max_chars;
    m.gate_diagonal = gate_diagonal;
    return m;
}

TrainSettings RunConfig::train_settings() const {
    TrainSettings t;
    t.adam.learning_rate = learning_rate;
    t.adam.weight_decay = weight_decay;
    t.weights.lambda = lambda;
    t.weights.gamma = gamma;
    t.coop_alpha = coop_alpha;
    t.ig_steps = ig_steps;
    t.relearn_cycles = relearn_cycles;
    t.batch_size = batch_size;
    t.memory_fresh_ratio = memory_fresh_ratio;
    t.max_epochs = max_epochs;
    t.patience = patience;
    t.seed = seed;
    if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
    if (lambda < 0 || gamma < 0) throw ConfigError("lambda and gamma must be >= 0");
    return t;
}

StrategyFlags RunConfig::strategy_flags() const {
    StrategyFlags f;
    f.aux = use_aux;
    f.coop = use_coop && use_aux;
    f.more = use_more;
    f.less = use_less;
    f.mem = use_mem;
    f.align = use_align && use_mem;
    return f;
}

PerturbConfig RunConfig::perturb_config(PerturbationKind kind) const {
    PerturbConfig p;
    p.kind = kind;
    p.rate = rate;
    p.seed = seed;
    p.edits_per_token = edits_per_token;
    p.distract_word_count = distract_word_count;
    return p;
}

std::vector<PerturbationKind> RunConfig::kind_list() const {
    std::vector<PerturbationKind> out;
    std::stringstream ss(kinds);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string name = trim(item);
        if (name.empty()) continue;
        auto k = parse_kind(name);
        if (!k) throw ConfigError("unknown perturbation kind in 'kinds': " + name);
        out.push_back(*k);
    }
    if (out.empty()) throw ConfigError("config key 'kinds' lists no perturbation kinds");
    return out;
}

LlmClientConfig RunConfig::llm_config() const {
    LlmClientConfig c = LlmClientConfig::from_env();
    c.model = llm_model;
    c.retries = llm_retries;
    if (llm_mode == "stub") {
        c.stub_mode = true;
    } else if (llm_mode == "live") {
        if (c.endpoint.empty()) {
            throw ConfigError("llm_mode = live requires CONTIGUARD_LLM_ENDPOINT");
        }
        c.stub_mode = false;
    } else {
        throw ConfigError("llm_mode must be 'stub' or 'live'");
    }
    return c;
}

}  // namespace contiguard
