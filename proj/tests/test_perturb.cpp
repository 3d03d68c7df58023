#include <doctest.h>

#include <set>

#include "contiguard/errors.hpp"
#include "contiguard/perturb.hpp"
#include "contiguard/rng.hpp"
#include "perturb_checks.hpp"
#include "test_helpers.hpp"

using namespace contiguard;
using testing::shipped_lexicons;
using testing::tiny_lexicons;

TEST_CASE("kind names round trip and cover all nine operators") {
    CHECK(kAllPerturbationKinds.size() == 9);
    std::set<std::string> names;
    for (auto k : kAllPerturbationKinds) {
        auto parsed = parse_kind(to_string(k));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == k);
        names.insert(to_string(k));
    }
    CHECK(names.size() == 9);
    CHECK_FALSE(parse_kind("leetspeak").has_value());
}

TEST_CASE("shipped lexicons satisfy the load invariants and desk-scale sizes") {
    const Lexicons& lex = shipped_lexicons();
    std::size_t homoglyph_pairs = 0;
    for (const auto& [key, alts] : lex.homoglyph_map) {
        homoglyph_pairs += alts.size();
        for (char32_t alt : alts) CHECK(alt != key);
    }
    CHECK(homoglyph_pairs >= 200);
    CHECK(lex.abbr_map.size() >= 500);
    CHECK(lex.distract_words.size() >= 200);
    CHECK(lex.authority_intros.size() >= 50);
    for (const auto& [phrase, _] : lex.abbr_map) CHECK(phrase == ascii_lower(phrase));
}

TEST_CASE("select_targets picks the single eligible token") {
    Lexicons lex = tiny_lexicons();
    PerturbConfig cfg;
    cfg.rate = 0.2;
    cfg.seed = 0;
    auto targets = select_targets({"you", "are", "an", "idiot"}, lex, cfg);
    CHECK(targets == std::vector<std::size_t>{3});
}

TEST_CASE("select_targets returns empty for no eligible tokens") {
    Lexicons lex = tiny_lexicons();
    PerturbConfig cfg;
    CHECK(select_targets({"hello", "world"}, lex, cfg).empty());
    CHECK(select_targets({}, lex, cfg).empty());
}

TEST_CASE("select_targets samples ceil(rate * eligible) without replacement, stable under seed") {
    Lexicons lex = tiny_lexicons();
    std::vector<std::string> tokens(10, "idiot");
    PerturbConfig cfg;
    cfg.rate = 0.2;
    cfg.seed = 0;
    auto a = select_targets(tokens, lex, cfg);
    auto b = select_targets(tokens, lex, cfg);
    CHECK(a.size() == 2);
    CHECK(a == b);
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == a.size());
    cfg.seed = 1;
    // Different seeds may pick different indices but the count is fixed.
    CHECK(select_targets(tokens, lex, cfg).size() == 2);
}

TEST_CASE("select_targets rejects invalid rate") {
    Lexicons lex = tiny_lexicons();
    PerturbConfig cfg;
    cfg.rate = 0.0;
    CHECK_THROWS_AS(select_targets({"idiot"}, lex, cfg), ConfigError);
    cfg.rate = 1.5;
    CHECK_THROWS_AS(select_targets({"idiot"}, lex, cfg), ConfigError);
}

TEST_CASE("repeat keeps the input as a subsequence and grows it") {
    Lexicons lex = tiny_lexicons();
    PerturbConfig cfg;
    cfg.kind = PerturbationKind::Repeat;
    cfg.seed = 7;
    std::string out = apply("moron", cfg, lex);
    auto in_cps = utf8_decode("moron");
    auto out_cps = utf8_decode(out);
    CHECK(out_cps.size() > in_cps.size());
    CHECK(checks::is_subsequence(in_cps, out_cps));
}

TEST_CASE("homoglyph substitutes mapped characters at equal length") {
    Lexicons lex = tiny_lexicons();
    PerturbConfig cfg;
    cfg.kind = PerturbationKind::Homoglyph;
    cfg.seed = 3;
    std::string out = apply("idiot", cfg, lex);
    auto in_cps = utf8_decode("idiot");
    auto out_cps = utf8_decode(out);
    REQUIRE(in_cps.size() == out_cps.size());
    int changed = 0;
    for (std::size_t i = 0; i < in_cps.size(); ++i) {
        if (in_cps[i] != out_cps[i]) {
            ++changed;
            const auto& alts = lex.homoglyph_map.at(in_cps[i]);
            CHECK(std::find(alts.begin(), alts.end(), out_cps[i]) != alts.end());
        }
    }
    CHECK(changed >= 1);
}

TEST_CASE("maskword masks with special characters at equal length") {
    Lexicons lex = tiny_lexicons();
    PerturbConfig cfg;
    cfg.kind = PerturbationKind::Maskword;
    cfg.seed = 5;
    cfg.edits_per_token = 2;
    std::string out = apply("fool", cfg, lex);
    auto in_cps = utf8_decode("fool");
    auto out_cps = utf8_decode(out);
    REQUIRE(in_cps.size() == out_cps.size());
    int masked = 0;
    for (std::size_t i = 0; i < in_cps.size(); ++i) {
        if (in_cps[i] != out_cps[i]) {
            ++masked;
            CHECK(lex.special_chars.count(out_cps[i]) == 1);
        }
    }
    CHECK(masked >= 1);
}

TEST_CASE("swap preserves the character multiset") {
    Lexicons lex = tiny_lexicons();
    PerturbConfig cfg;
    cfg.kind = PerturbationKind::Swap;
    cfg.seed = 0;
    std::string out = apply("idiot", cfg, lex);
    CHECK(checks::same_multiset(utf8_decode("idiot"), utf8_decode(out)));
}

TEST_CASE("insert recovers the input after stripping special characters") {
    Lexicons lex = tiny_lexicons();
    PerturbConfig cfg;
    cfg.kind = PerturbationKind::Insert;
    cfg.seed = 11;
    std::string input = "you are an idiot";
    std::string out = apply(input, cfg, lex);
    CHECK(out != input);
    std::vector<char32_t> specials(lex.special_chars.begin(), lex.special_chars.end());
    CHECK(remove_code_points(out, specials) == input);
}

TEST_CASE("abbreviation replaces mapped phrases") {
    Lexicons lex = tiny_lexicons();
    lex.toxic_relevant_words.insert("bite");
    PerturbConfig cfg;
    cfg.kind = PerturbationKind::Abbreviation;
    cfg.rate = 1.0;
    std::string out = apply("bite me idiot", cfg, lex);
    CHECK(out.find("BTM") != std::string::npos);
    CHECK(out.find("bite me") == std::string::npos);
}

TEST_CASE("distract and authorization keep the text as a verbatim suffix") {
    Lexicons lex = tiny_lexicons();
    std::string input = "you are an idiot";
    for (auto kind : {PerturbationKind::Distract, PerturbationKind::Authorization}) {
        PerturbConfig cfg;
        cfg.kind = kind;
        cfg.seed = 9;
        std::string out = apply(input, cfg, lex);
        REQUIRE(out.size() > input.size());
        CHECK(out.compare(out.size() - input.size(), input.size(), input) == 0);
    }
}

TEST_CASE("homoglyph leaves unmappable tokens unchanged") {
    Lexicons lex = tiny_lexicons();
    lex.toxic_relevant_words.insert("zzz");  // no homoglyph entry for z in tiny map
    PerturbConfig cfg;
    cfg.kind = PerturbationKind::Homoglyph;
    CHECK(apply("zzz", cfg, lex) == "zzz");
}

TEST_CASE("apply is a pure function of text, config and lexicons") {
    const Lexicons& lex = shipped_lexicons();
    Rng rng = make_rng(42);
    for (auto kind : kAllPerturbationKinds) {
        for (int i = 0; i < 25; ++i) {
            std::string text = checks::random_text(rng, lex);
            PerturbConfig cfg;
            cfg.kind = kind;
            cfg.seed = rng();
            CHECK(apply(text, cfg, lex) == apply(text, cfg, lex));
        }
    }
}

TEST_CASE("operator structural contracts hold on random texts") {
    const Lexicons& lex = shipped_lexicons();
    Rng rng = make_rng(7);
    for (auto kind : kAllPerturbationKinds) {
        for (int i = 0; i < 100; ++i) {
            std::string text = checks::random_text(rng, lex);
            PerturbConfig cfg;
            cfg.kind = kind;
            cfg.seed = rng();
            std::string out = apply(text, cfg, lex);
            std::string err = checks::check_operator(text, out, cfg, lex);
            if (!err.empty()) {
                CAPTURE(text);
                CAPTURE(out);
                CAPTURE(to_string(kind));
                FAIL_CHECK(err);
            }
        }
    }
}

TEST_CASE("empty text is returned unchanged") {
    Lexicons lex = tiny_lexicons();
    for (auto kind : kAllPerturbationKinds) {
        PerturbConfig cfg;
        cfg.kind = kind;
        CHECK(apply("", cfg, lex).empty());
    }
}

TEST_CASE("authorize_prefix: singleton, determinism, coverage") {
    std::vector<std::string> one = {"I am a scientist with decades of experience."};
    CHECK(authorize_prefix(one, 123) == one[0]);

    std::vector<std::string> many;
    for (int i = 0; i < 8; ++i) many.push_back("intro " + std::to_string(i));
    CHECK(authorize_prefix(many, 0) == authorize_prefix(many, 0));

    std::set<std::string> seen;
    for (int s = 0; s < 1000; ++s) seen.insert(authorize_prefix(many, static_cast<std::uint64_t>(s)));
    CHECK(seen.size() == many.size());

    CHECK_THROWS_AS(authorize_prefix({}, 0), ConfigError);
}
