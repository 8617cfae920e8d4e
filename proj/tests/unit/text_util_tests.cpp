#include <doctest.h>

#include "compass/util/csv.hpp"
#include "compass/util/digest.hpp"
#include "compass/util/text.hpp"

using namespace compass;

TEST_SUITE("text_util") {

TEST_CASE("to_lower and trim") {
    CHECK(util::to_lower("Diss. Pb (NMOL/kg)") == "diss. pb (nmol/kg)");
    CHECK(util::trim("  x  ") == "x");
    CHECK(util::trim("\t\r\n x\n") == "x");
    CHECK(util::trim("") == "");
    CHECK(util::trim("   ") == "");
}

TEST_CASE("tokenize_alnum splits on non-alphanumerics") {
    const auto tokens = util::tokenize_alnum("Pb halide, 210Pb; n.d.");
    REQUIRE(tokens.size() == 5);
    CHECK(tokens[0] == "Pb");
    CHECK(tokens[1] == "halide");
    CHECK(tokens[2] == "210Pb");
    CHECK(tokens[3] == "n");
    CHECK(tokens[4] == "d");
}

TEST_CASE("contains_token is whole-token and case-insensitive") {
    CHECK(util::contains_token("results lead to conclusions", "lead"));
    CHECK(util::contains_token("the PB halide phase", "pb"));
    CHECK_FALSE(util::contains_token("leaded gasoline", "lead"));
    CHECK_FALSE(util::contains_token("mBq/m3", "m"));
    CHECK(util::contains_token("dissolved 210Pb activity", "210pb"));
    CHECK_FALSE(util::contains_token("", "pb"));
}

TEST_CASE("extract_json_body strips fences and prose") {
    CHECK(util::extract_json_body("```json\n{\"a\": 1}\n```") == "{\"a\": 1}");
    CHECK(util::extract_json_body("```\n[1, 2]\n```") == "[1, 2]");
    CHECK(util::extract_json_body("Sure, here you go: {\"label\": \"x\"} hope that helps") ==
          "{\"label\": \"x\"}");
    CHECK(util::extract_json_body("{\"plain\": true}") == "{\"plain\": true}");
    CHECK(util::extract_json_body("no json here") == "");
}

TEST_CASE("estimate_tokens is ceil(bytes / 4)") {
    CHECK(util::estimate_tokens("") == 0);
    CHECK(util::estimate_tokens("abcd") == 1);
    CHECK(util::estimate_tokens("abcde") == 2);
    CHECK(util::estimate_tokens(std::string(8192 * 4 + 1, 'x')) == 8193);
}

TEST_CASE("split keeps empty fields") {
    const auto parts = util::split("a,b,,c", ',');
    REQUIRE(parts.size() == 4);
    CHECK(parts[2] == "");
    CHECK(util::split("", ',').size() == 1);
}

TEST_CASE("starts_with_ci") {
    CHECK(util::starts_with_ci("# Ocean-Mask v1", "# ocean-mask"));
    CHECK_FALSE(util::starts_with_ci("ocean", "# ocean"));
}

TEST_CASE("csv parse handles quoting, embedded separators, crlf") {
    const auto rows = util::parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,\"two\nlines\",3\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][1] == "b,c");
    CHECK(rows[0][2] == "say \"hi\"");
    CHECK(rows[1][1] == "two\nlines");
    CHECK(rows[1][2] == "3");
}

TEST_CASE("csv trailing newline does not add a row") {
    CHECK(util::parse_csv("a,b\n").size() == 1);
    CHECK(util::parse_csv("a,b").size() == 1);
}

TEST_CASE("csv write round-trips") {
    const std::vector<std::vector<std::string>> rows = {
        {"plain", "with,comma", "with \"quote\""},
        {"multi\nline", "", "tail"},
    };
    CHECK(util::parse_csv(util::write_csv(rows)) == rows);
}

TEST_CASE("csv_escape quotes only when needed") {
    CHECK(util::csv_escape("plain") == "plain");
    CHECK(util::csv_escape("a,b") == "\"a,b\"");
    CHECK(util::csv_escape("q\"q") == "\"q\"\"q\"");
}

TEST_CASE("fnv1a64 matches published vectors") {
    CHECK(util::fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(util::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(util::digest_hex("") == "cbf29ce484222325");
    CHECK(util::digest_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("prompt_digest separates system from user text") {
    CHECK(util::prompt_digest("ab", "c") != util::prompt_digest("a", "bc"));
    CHECK(util::prompt_digest("ab", "") != util::prompt_digest("", "ab"));
    CHECK(util::prompt_digest("s", "u") == util::prompt_digest("s", "u"));
}

} // TEST_SUITE
