#include "contiguard/text.hpp"

#include <algorithm>
#include <cctype>

namespace contiguard {

namespace {
constexpr char32_t kReplacement = 0xFFFD;

inline bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
}  // namespace

std::vector<char32_t> utf8_decode(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        std::size_t len = 0;
        if (c < 0x80) {
            cp = c;
            len = 1;
        } else if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F;
            len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F;
            len = 3;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07;
            len = 4;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k) {
            unsigned char cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!ok) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void utf8_append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string utf8_encode(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) utf8_append(out, cp);
    return out;
}

std::vector<TokenSpan> token_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size()) break;
        std::size_t b = i;
        while (i < text.size() && !is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
        spans.push_back({b, i, std::string(text.substr(b, i - b))});
    }
    return spans;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    for (auto& sp : token_spans(text)) out.push_back(std::move(sp.text));
    return out;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return (c < 0x80) ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
    });
    return out;
}

bool is_ascii_punct(char32_t cp) {
    return cp < 0x80 && std::ispunct(static_cast<int>(cp)) != 0;
}

std::string strip_punct_edges(std::string_view token) {
    auto cps = utf8_decode(token);
    std::size_t b = 0, e = cps.size();
    while (b < e && is_ascii_punct(cps[b])) ++b;
    while (e > b && is_ascii_punct(cps[e - 1])) --e;
    return utf8_encode(std::vector<char32_t>(cps.begin() + b, cps.begin() + e));
}

std::string squeeze_repeats(std::string_view s) {
    auto cps = utf8_decode(s);
    std::string out;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (i == 0 || cps[i] != cps[i - 1]) utf8_append(out, cps[i]);
    }
    return out;
}

std::string remove_code_points(std::string_view s, const std::vector<char32_t>& banned) {
    auto cps = utf8_decode(s);
    std::string out;
    for (char32_t cp : cps) {
        if (std::find(banned.begin(), banned.end(), cp) == banned.end()) utf8_append(out, cp);
    }
    return out;
}

std::string normalize_text(std::string_view s, std::size_t max_chars) {
    auto cps = utf8_decode(s);
    if (cps.size() > max_chars) cps.resize(max_chars);
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) {
        if (cp < 0x80) cp = static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
        utf8_append(out, cp);
    }
    return out;
}

}  // namespace contiguard
