#include "contiguard/enrich.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "contiguard/errors.hpp"
#include "contiguard/rng.hpp"

namespace contiguard {

using json = nlohmann::json;

std::string build_prompt(const std::string& text) {
    std::ostringstream out;
    out << "You analyze possibly obfuscated social media text.\n"
        << "Work through three stages and label each section exactly as shown.\n"
        << "HOW: state how you will mine the possible meaning and toxicity-related clues "
           "from the text (e.g. restoring disguised characters, expanding slang).\n"
        << "WHY: justify why that procedure reveals the hidden meaning.\n"
        << "WHAT: give the possible meaning of the text and list any toxicity-related clues.\n"
        << "Text: " << text << "\n"
        << "Respond with the three labeled sections HOW:, WHY:, WHAT:.";
    return out.str();
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Case-insensitive search for "LABEL:" returning offset past the colon.
std::size_t find_label(const std::string& upper, const std::string& label, std::size_t from = 0) {
    std::size_t pos = upper.find(label + ":", from);
    if (pos == std::string::npos) return std::string::npos;
    return pos;
}

}  // namespace

std::optional<AuxiliaryInfo> parse_sections(const std::string& content) {
    std::string upper = content;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    std::size_t how_pos = find_label(upper, "HOW");
    std::size_t why_pos = find_label(upper, "WHY", how_pos == std::string::npos ? 0 : how_pos);
    std::size_t what_pos = find_label(upper, "WHAT", why_pos == std::string::npos ? 0 : why_pos);
    if (what_pos == std::string::npos) return std::nullopt;

    auto section = [&](std::size_t start, std::size_t label_len, std::size_t end) {
        if (start == std::string::npos) return std::string();
        std::size_t b = start + label_len + 1;
        std::size_t e = (end == std::string::npos) ? content.size() : end;
        if (b >= e) return std::string();
        return trim(content.substr(b, e - b));
    };
    AuxiliaryInfo info;
    info.how = section(how_pos, 3, why_pos);
    info.why = section(why_pos, 3, what_pos);
    info.what = section(what_pos, 4, std::string::npos);
    info.raw_response = content;
    if (info.what.empty()) return std::nullopt;
    return info;
}

// ---------------------------------------------------------------------------

StubEnricher::StubEnricher(const Lexicons& lexicons) : lex_(&lexicons) {
    // Reverse homoglyph map, lowercase keys claiming their alternatives first
    // so e.g. '1' restores to 'i' rather than 'I'.
    std::vector<char32_t> keys;
    keys.reserve(lexicons.homoglyph_map.size());
    for (const auto& [k, _] : lexicons.homoglyph_map) keys.push_back(k);
    std::sort(keys.begin(), keys.end(), [](char32_t a, char32_t b) {
        bool la = a >= U'a' && a <= U'z';
        bool lb = b >= U'a' && b <= U'z';
        if (la != lb) return la;
        return a < b;
    });
    for (char32_t k : keys) {
        for (char32_t alt : lexicons.homoglyph_map.at(k)) {
            reverse_homoglyph_.emplace(alt, k);
        }
    }
    for (const auto& [phrase, abbr] : lexicons.abbr_map) {
        reverse_abbr_.emplace(ascii_lower(abbr), phrase);
    }
    for (const auto& w : lexicons.toxic_relevant_words) {
        canon_toxic_.emplace(squeeze_repeats(w), w);
    }
}

std::string StubEnricher::deobfuscate(const std::string& text) const {
    std::vector<std::string> out_tokens;
    for (const auto& token : split_whitespace(text)) {
        std::string key = ascii_lower(strip_punct_edges(token));
        auto ab = reverse_abbr_.find(key);
        if (ab != reverse_abbr_.end()) {
            out_tokens.push_back(ab->second);
            continue;
        }
        // Character-level restoration; plain ASCII letters are never touched.
        std::string restored;
        for (char32_t cp : utf8_decode(token)) {
            bool ascii_letter = (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
            if (!ascii_letter) {
                auto it = reverse_homoglyph_.find(cp);
                if (it != reverse_homoglyph_.end()) cp = it->second;
            }
            utf8_append(restored, cp);
        }
        std::string restored_key = ascii_lower(strip_punct_edges(restored));
        auto ab2 = reverse_abbr_.find(restored_key);
        if (ab2 != reverse_abbr_.end()) {
            out_tokens.push_back(ab2->second);
        } else {
            out_tokens.push_back(restored);
        }
    }
    std::string out;
    for (std::size_t i = 0; i < out_tokens.size(); ++i) {
        if (i) out += ' ';
        out += out_tokens[i];
    }
    return out;
}

std::vector<std::string> StubEnricher::toxicity_clues(const std::string& deobfuscated) const {
    std::vector<char32_t> punct;
    for (char32_t cp : lex_->special_chars) punct.push_back(cp);
    std::vector<std::string> clues;
    for (const auto& token : split_whitespace(deobfuscated)) {
        std::string canon = squeeze_repeats(ascii_lower(remove_code_points(token, punct)));
        auto it = canon_toxic_.find(canon);
        if (it != canon_toxic_.end() &&
            std::find(clues.begin(), clues.end(), it->second) == clues.end()) {
            clues.push_back(it->second);
        }
    }
    return clues;
}

AuxiliaryInfo StubEnricher::enrich(const std::string& text) const {
    AuxiliaryInfo info;
    info.provider = "stub";
    info.how =
        "Restore visually disguised characters, expand known abbreviations and slang, "
        "and compare each canonical token against the toxic vocabulary.";
    info.why =
        "Evasive perturbations hide toxic words behind lookalike characters and shorthand; "
        "restoring canonical forms exposes the underlying wording.";
    std::string restored = deobfuscate(text);
    auto clues = toxicity_clues(restored);
    std::ostringstream what;
    what << "Possible meaning: " << restored << ".";
    if (clues.empty()) {
        what << " No explicit toxicity clues found.";
    } else {
        what << " Toxicity clues:";
        for (std::size_t i = 0; i < clues.size(); ++i) what << (i ? ", " : " ") << clues[i];
        what << ".";
    }
    info.what = what.str();
    return info;
}

// ---------------------------------------------------------------------------

LlmClientConfig LlmClientConfig::from_env() {
    LlmClientConfig cfg;
    if (const char* ep = std::getenv("CONTIGUARD_LLM_ENDPOINT")) {
        cfg.endpoint = ep;
        cfg.stub_mode = cfg.endpoint.empty();
    }
    if (const char* key = std::getenv("CONTIGUARD_LLM_API_KEY")) cfg.api_key = key;
    return cfg;
}

std::optional<AuxiliaryInfo> AuxCache::get(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = items_.find(id);
    if (it == items_.end()) return std::nullopt;
    return it->second;
}

void AuxCache::put(const std::string& id, const AuxiliaryInfo& info) {
    std::lock_guard<std::mutex> lock(mu_);
    items_[id] = info;
}

std::size_t AuxCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return items_.size();
}

void AuxCache::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::lock_guard<std::mutex> lock(mu_);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        AuxiliaryInfo info;
        info.how = j.value("how", "");
        info.why = j.value("why", "");
        info.what = j.value("what", "");
        info.provider = j.value("provider", "stub");
        info.raw_response = j.value("raw_response", "");
        items_[j.at("id").get<std::string>()] = info;
    }
}

void AuxCache::save_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write auxiliary cache: " + path);
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::string> ids;
    ids.reserve(items_.size());
    for (const auto& [id, _] : items_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
        const auto& info = items_.at(id);
        json j{{"id", id},
               {"how", info.how},
               {"why", info.why},
               {"what", info.what},
               {"provider", info.provider},
               {"raw_response", info.raw_response}};
        out << j.dump() << "\n";
    }
}

AuxiliaryProvider::AuxiliaryProvider(const Lexicons& lexicons, LlmClientConfig config)
    : stub_(lexicons), config_(std::move(config)) {}

AuxiliaryInfo AuxiliaryProvider::fetch_remote(const std::string& text) {
    std::string url = config_.endpoint;
    std::string host = url, path = "/v1/chat/completions";
    auto scheme_end = url.find("://");
    std::size_t path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        host = url.substr(0, path_start);
        path = url.substr(path_start);
    }

    json body{{"model", config_.model},
              {"messages", json::array({json{{"role", "user"}, {"content", build_prompt(text)}}})},
              {"temperature", 0}};

    httplib::Client client(host);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        ++network_calls_;
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res || res->status != 200) continue;
        try {
            json reply = json::parse(res->body);
            std::string content = reply.at("choices").at(0).at("message").at("content");
            auto parsed = parse_sections(content);
            if (parsed) {
                parsed->provider = "llm";
                return *parsed;
            }
        } catch (const json::exception&) {
            // malformed reply; retry
        }
    }
    AuxiliaryInfo fallback = stub_.enrich(text);
    fallback.provider = "stub";
    return fallback;
}

AuxiliaryInfo AuxiliaryProvider::fetch(const std::string& id, const std::string& text) {
    if (auto hit = cache_.get(id)) return *hit;
    AuxiliaryInfo info = config_.stub_mode ? stub_.enrich(text) : fetch_remote(text);
    cache_.put(id, info);
    return info;
}

// ---------------------------------------------------------------------------

GateParams GateParams::init(int dim, std::uint64_t seed, bool diagonal) {
    GateParams g;
    g.diagonal = diagonal;
    g.conv_kernel = {0.25, 0.5, 0.25};  // smoothing start
    g.gate_weights = Mat(dim, dim);
    g.gate_bias.assign(dim, 0.0);
    Rng rng = make_rng(seed);
    for (double& v : g.gate_weights.data) v = 0.05 * rand_normal(rng);
    return g;
}

void GateGrads::init_like(const GateParams& p) {
    conv_kernel.assign(p.conv_kernel.size(), 0.0);
    gate_weights = Mat(p.gate_weights.rows, p.gate_weights.cols);
    gate_bias.assign(p.gate_bias.size(), 0.0);
}

GateForward gate_forward(const Vec& x_p, const Vec& x_a, const GateParams& gate) {
    if (x_p.size() != x_a.size() || static_cast<int>(x_p.size()) != gate.dim()) {
        throw DataError("gate_forward: dimension mismatch");
    }
    const int d = gate.dim();
    GateForward f;
    f.diff.resize(d);
    f.sq.resize(d);
    for (int i = 0; i < d; ++i) {
        f.diff[i] = x_p[i] - x_a[i];
        f.sq[i] = f.diff[i] * f.diff[i];
    }
    // Width-3 convolution, symmetric zero padding.
    f.conv.assign(d, 0.0);
    for (int i = 0; i < d; ++i) {
        double acc = gate.conv_kernel[1] * f.sq[i];
        if (i > 0) acc += gate.conv_kernel[0] * f.sq[i - 1];
        if (i + 1 < d) acc += gate.conv_kernel[2] * f.sq[i + 1];
        f.conv[i] = acc;
    }
    f.pre.assign(d, 0.0);
    if (gate.diagonal) {
        for (int j = 0; j < d; ++j) f.pre[j] = gate.gate_weights.at(j, j) * f.conv[j] + gate.gate_bias[j];
    } else {
        for (int i = 0; i < d; ++i) {
            const double ci = f.conv[i];
            const double* wrow = gate.gate_weights.row(i);
            for (int j = 0; j < d; ++j) f.pre[j] += wrow[j] * ci;
        }
        for (int j = 0; j < d; ++j) f.pre[j] += gate.gate_bias[j];
    }
    f.w.resize(d);
    for (int j = 0; j < d; ++j) f.w[j] = sigmoid(f.pre[j]);
    return f;
}

Vec gate_weights(const Vec& x_p, const Vec& x_a, const GateParams& gate) {
    return gate_forward(x_p, x_a, gate).w;
}

void gate_backward(const GateForward& fwd, const GateParams& gate, const Vec& dw,
                   GateGrads& grads, Vec& dx_p, Vec& dx_a) {
    const int d = gate.dim();
    Vec dpre(d);
    for (int j = 0; j < d; ++j) dpre[j] = dw[j] * fwd.w[j] * (1.0 - fwd.w[j]);

    Vec dconv(d, 0.0);
    if (gate.diagonal) {
        for (int j = 0; j < d; ++j) {
            grads.gate_weights.at(j, j) += fwd.conv[j] * dpre[j];
            grads.gate_bias[j] += dpre[j];
            dconv[j] = gate.gate_weights.at(j, j) * dpre[j];
        }
    } else {
        for (int i = 0; i < d; ++i) {
            const double ci = fwd.conv[i];
            double* growi = grads.gate_weights.row(i);
            const double* wrow = gate.gate_weights.row(i);
            double acc = 0.0;
            for (int j = 0; j < d; ++j) {
                growi[j] += ci * dpre[j];
                acc += wrow[j] * dpre[j];
            }
            dconv[i] = acc;
        }
        for (int j = 0; j < d; ++j) grads.gate_bias[j] += dpre[j];
    }

    Vec dsq(d, 0.0);
    for (int i = 0; i < d; ++i) {
        const double dc = dconv[i];
        grads.conv_kernel[1] += dc * fwd.sq[i];
        dsq[i] += gate.conv_kernel[1] * dc;
        if (i > 0) {
            grads.conv_kernel[0] += dc * fwd.sq[i - 1];
            dsq[i - 1] += gate.conv_kernel[0] * dc;
        }
        if (i + 1 < d) {
            grads.conv_kernel[2] += dc * fwd.sq[i + 1];
            dsq[i + 1] += gate.conv_kernel[2] * dc;
        }
    }
    for (int i = 0; i < d; ++i) {
        double dd = 2.0 * fwd.diff[i] * dsq[i];
        dx_p[i] += dd;
        dx_a[i] -= dd;
    }
}

Vec cooperate(const Vec& x_p, const Vec& x_a, const Vec& w) {
    if (x_p.size() != x_a.size() || x_p.size() != w.size()) {
        throw DataError("cooperate: dimension mismatch");
    }
    Vec f(x_p.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        f[k] = (x_p[k] + w[k] * x_a[k]) / (1.0 + w[k]);
    }
    return f;
}

void cooperate_backward(const Vec& x_p, const Vec& x_a, const Vec& w, const Vec& df,
                        Vec& dx_p, Vec& dx_a, Vec& dw) {
    for (std::size_t k = 0; k < x_p.size(); ++k) {
        const double den = 1.0 + w[k];
        dx_p[k] += df[k] / den;
        dx_a[k] += df[k] * w[k] / den;
        dw[k] += df[k] * (x_a[k] - x_p[k]) / (den * den);
    }
}

}  // namespace contiguard
