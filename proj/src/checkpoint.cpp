#include "contiguard/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "contiguard/errors.hpp"

namespace contiguard {

using json = nlohmann::json;

namespace {

struct ArraySpec {
    std::string name;
    const double* data;
    std::size_t count;
    int rows, cols;  // cols = 0 for flat vectors
};

json memories_to_json(const MemoryBuffer& buffer) {
    json j = json::array();
    for (const auto& [domain, entries] : buffer.domains) {
        json ents = json::array();
        for (const auto& e : entries) {
            ents.push_back(json{{"id", e.sample.id},
                                {"label", e.sample.label},
                                {"domain", e.sample.domain},
                                {"text_buckets", e.sample.text_buckets},
                                {"aux_buckets", e.sample.aux_buckets},
                                {"f_old", e.f_old}});
        }
        j.push_back(json{{"domain", domain}, {"entries", ents}});
    }
    return j;
}

MemoryBuffer memories_from_json(const json& j, int capacity) {
    MemoryBuffer buffer;
    buffer.capacity_per_domain = capacity;
    for (const auto& dj : j) {
        std::vector<MemoryEntry> entries;
        for (const auto& ej : dj.at("entries")) {
            MemoryEntry e;
            e.sample.id = ej.at("id").get<std::string>();
            e.sample.label = ej.at("label").get<int>();
            e.sample.domain = ej.value("domain", "");
            e.sample.text_buckets = ej.at("text_buckets").get<std::vector<std::uint32_t>>();
            e.sample.aux_buckets = ej.at("aux_buckets").get<std::vector<std::uint32_t>>();
            e.f_old = ej.at("f_old").get<Vec>();
            entries.push_back(std::move(e));
        }
        buffer.domains.emplace_back(dj.at("domain").get<std::string>(), std::move(entries));
    }
    return buffer;
}

}  // namespace

void save_checkpoint(const std::string& path, const DetectorParams& params, const json& config,
                     const std::string& rng_state, const MemoryBuffer& memories) {
    std::vector<ArraySpec> arrays = {
        {"embedding", params.embedding.data.data(), params.embedding.data.size(),
         params.embedding.rows, params.embedding.cols},
        {"head_hidden_w", params.head_hidden_w.data.data(), params.head_hidden_w.data.size(),
         params.head_hidden_w.rows, params.head_hidden_w.cols},
        {"head_hidden_b", params.head_hidden_b.data(), params.head_hidden_b.size(),
         static_cast<int>(params.head_hidden_b.size()), 0},
        {"head_out_w", params.head_out_w.data.data(), params.head_out_w.data.size(),
         params.head_out_w.rows, params.head_out_w.cols},
        {"head_out_b", params.head_out_b.data(), params.head_out_b.size(),
         static_cast<int>(params.head_out_b.size()), 0},
        {"gate_kernel", params.gate.conv_kernel.data(), params.gate.conv_kernel.size(),
         static_cast<int>(params.gate.conv_kernel.size()), 0},
        {"gate_weights", params.gate.gate_weights.data.data(), params.gate.gate_weights.data.size(),
         params.gate.gate_weights.rows, params.gate.gate_weights.cols},
        {"gate_bias", params.gate.gate_bias.data(), params.gate.gate_bias.size(),
         static_cast<int>(params.gate.gate_bias.size()), 0},
    };

    json manifest;
    manifest["version"] = kCheckpointVersion;
    manifest["model"] = {{"dim", params.config.dim},
                         {"hidden", params.config.hidden},
                         {"buckets", params.config.buckets},
                         {"max_chars", params.config.max_chars},
                         {"gate_diagonal", params.config.gate_diagonal}};
    manifest["config"] = config;
    manifest["rng_state"] = rng_state;
    manifest["memories"] = memories_to_json(memories);
    manifest["memory_capacity"] = memories.capacity_per_domain;
    json specs = json::array();
    std::size_t offset = 0;
    for (const auto& a : arrays) {
        specs.push_back(json{{"name", a.name}, {"rows", a.rows}, {"cols", a.cols},
                             {"offset", offset}, {"count", a.count}});
        offset += a.count;
    }
    manifest["arrays"] = specs;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    std::string mstr = manifest.dump();
    std::uint64_t mlen = mstr.size();
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    for (const auto& a : arrays) {
        out.write(reinterpret_cast<const char*>(a.data),
                  static_cast<std::streamsize>(a.count * sizeof(double)));
    }
    if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw DataError("not a checkpoint file: " + path);
    }
    std::uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    std::string mstr(mlen, '\0');
    in.read(mstr.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw DataError("truncated checkpoint manifest: " + path);
    json manifest = json::parse(mstr);
    if (manifest.at("version").get<std::uint32_t>() != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version in " + path);
    }

    Checkpoint ckpt;
    const auto& mj = manifest.at("model");
    ckpt.params.config.dim = mj.at("dim").get<int>();
    ckpt.params.config.hidden = mj.at("hidden").get<int>();
    ckpt.params.config.buckets = mj.at("buckets").get<int>();
    ckpt.params.config.max_chars = mj.at("max_chars").get<int>();
    ckpt.params.config.gate_diagonal = mj.at("gate_diagonal").get<bool>();
    ckpt.config = manifest.value("config", json::object());
    ckpt.rng_state = manifest.value("rng_state", "");
    ckpt.memories = memories_from_json(manifest.at("memories"),
                                       manifest.value("memory_capacity", 8));

    auto read_array = [&](const json& spec, double* dst, std::size_t expected) {
        std::size_t count = spec.at("count").get<std::size_t>();
        if (count != expected) throw DataError("checkpoint array size mismatch: " + path);
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw DataError("truncated checkpoint arrays: " + path);
    };

    DetectorParams& p = ckpt.params;
    p.embedding = Mat(p.config.buckets, p.config.dim);
    p.head_hidden_w = Mat(p.config.dim, p.config.hidden);
    p.head_hidden_b.assign(static_cast<std::size_t>(p.config.hidden), 0.0);
    p.head_out_w = Mat(p.config.hidden, 2);
    p.head_out_b.assign(2, 0.0);
    p.gate.conv_kernel.assign(3, 0.0);
    p.gate.gate_weights = Mat(p.config.dim, p.config.dim);
    p.gate.gate_bias.assign(static_cast<std::size_t>(p.config.dim), 0.0);
    p.gate.diagonal = p.config.gate_diagonal;

    for (const auto& spec : manifest.at("arrays")) {
        std::string name = spec.at("name").get<std::string>();
        if (name == "embedding") read_array(spec, p.embedding.data.data(), p.embedding.data.size());
        else if (name == "head_hidden_w") read_array(spec, p.head_hidden_w.data.data(), p.head_hidden_w.data.size());
        else if (name == "head_hidden_b") read_array(spec, p.head_hidden_b.data(), p.head_hidden_b.size());
        else if (name == "head_out_w") read_array(spec, p.head_out_w.data.data(), p.head_out_w.data.size());
        else if (name == "head_out_b") read_array(spec, p.head_out_b.data(), p.head_out_b.size());
        else if (name == "gate_kernel") read_array(spec, p.gate.conv_kernel.data(), p.gate.conv_kernel.size());
        else if (name == "gate_weights") read_array(spec, p.gate.gate_weights.data.data(), p.gate.gate_weights.data.size());
        else if (name == "gate_bias") read_array(spec, p.gate.gate_bias.data(), p.gate.gate_bias.size());
        else throw DataError("unknown checkpoint array '" + name + "' in " + path);
    }
    return ckpt;
}

}  // namespace contiguard
