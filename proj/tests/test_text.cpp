#include <doctest.h>

#include "contiguard/text.hpp"

using namespace contiguard;

TEST_CASE("utf8 round trip") {
    std::string s = "id\xD1\x96ot f001 \xE2\x82\xAC";  // Cyrillic i, euro sign
    CHECK(utf8_encode(utf8_decode(s)) == s);
    CHECK(utf8_decode("idiot").size() == 5);
    CHECK(utf8_decode("\xD1\x96").size() == 1);
}

TEST_CASE("token spans preserve byte offsets") {
    std::string text = "  you  are\tan idiot ";
    auto spans = token_spans(text);
    REQUIRE(spans.size() == 4);
    CHECK(spans[0].text == "you");
    CHECK(text.substr(spans[3].begin, spans[3].end - spans[3].begin) == "idiot");
}

TEST_CASE("strip and squeeze helpers") {
    CHECK(strip_punct_edges("!!idiot??") == "idiot");
    CHECK(strip_punct_edges("idi+ot") == "idi+ot");  // interior punctuation stays
    CHECK(squeeze_repeats("iiiddioot") == "idiot");
    CHECK(squeeze_repeats("fool") == "fol");
    CHECK(ascii_lower("IdIoT") == "idiot");
}

TEST_CASE("normalize lowercases and caps length") {
    std::string longtext(500, 'A');
    auto norm = normalize_text(longtext, 360);
    CHECK(utf8_decode(norm).size() == 360);
    CHECK(norm[0] == 'a');
}
