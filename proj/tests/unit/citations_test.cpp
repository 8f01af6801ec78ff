#include <doctest.h>

#include <set>

#include "llmref/citations.hpp"

using namespace llmref;

namespace {

std::set<int> nums(const CitationMarker& m) {
  std::set<int> out;
  for (const auto& k : m.cited) out.insert(std::get<int>(k));
  return out;
}

}  // namespace

TEST_SUITE("citations") {
  TEST_CASE("enumerated forms") {
    auto ms = parse_citations("A [1], B [2-5], C [3,9] and D [4–6, 10].", NotationStyle::enumerated);
    REQUIRE(ms.size() == 4);
    CHECK(nums(ms[0]) == std::set<int>{1});
    CHECK(nums(ms[1]) == std::set<int>{2, 3, 4, 5});
    CHECK(nums(ms[2]) == std::set<int>{3, 9});
    CHECK(nums(ms[3]) == std::set<int>{4, 5, 6, 10});
    CHECK(ms[1].raw == "[2-5]");
    CHECK(ms[1].span_begin < ms[2].span_begin);
  }

  TEST_CASE("brackets that are not markers") {
    CHECK(parse_citations("a vector [x, y] and interval [0.5]", NotationStyle::enumerated).empty());
    CHECK(parse_citations("empty [] list", NotationStyle::enumerated).empty());
    CHECK(parse_enumerated_body("5-2").empty());
    CHECK(parse_enumerated_body("a").empty());
  }

  TEST_CASE("named forms") {
    auto ms = parse_citations("Cascades (Lavie et al., 1997; Nakamura and Sumita, 2006) and Jia et al. (2019) differ.",
                              NotationStyle::named);
    REQUIRE(ms.size() == 2);
    REQUIRE(ms[0].cited.size() == 2);
    CHECK(std::get<NamedKey>(ms[0].cited[0]) == NamedKey{{"Lavie"}, 1997, ""});
    CHECK(std::get<NamedKey>(ms[0].cited[1]) == NamedKey{{"Nakamura", "Sumita"}, 2006, ""});
    CHECK(std::get<NamedKey>(ms[1].cited[0]) == NamedKey{{"Jia"}, 2019, ""});
  }

  TEST_CASE("year suffixes and ambiguity") {
    std::vector<ReferenceEntry> refs = {
        make_reference(NamedKey{{"Lee"}, 2021, "a"}, "Lee, A. (2021a). Direct S2ST with units."),
        make_reference(NamedKey{{"Lee"}, 2021, "b"}, "Lee, A. (2021b). Textless S2ST on real data."),
    };
    auto ms = resolve_markers(parse_citations("(Lee et al., 2021b)", NotationStyle::named), refs);
    REQUIRE(ms.size() == 1);
    CHECK_FALSE(ms[0].unresolved);
    CHECK(ms[0].resolved_keys == std::vector<ReferenceKey>{refs[1].key});
    auto both = resolve_markers(parse_citations("(Lee et al., 2021)", NotationStyle::named), refs);
    REQUIRE(both.size() == 1);
    CHECK(both[0].ambiguous);
    CHECK(both[0].resolved_keys == std::vector<ReferenceKey>{refs[0].key});
  }

  TEST_CASE("resolution of enumerated markers") {
    std::vector<ReferenceEntry> refs = {make_reference(1, "One."), make_reference(2, "Two.")};
    auto ms = resolve_markers(parse_citations("x [1, 7]", NotationStyle::enumerated), refs);
    REQUIRE(ms.size() == 1);
    CHECK(ms[0].resolved_keys == std::vector<ReferenceKey>{1});
    auto none = resolve_markers(parse_citations("x [9]", NotationStyle::enumerated), refs);
    CHECK(none[0].unresolved);
  }

  TEST_CASE("unknown notation tries both grammars") {
    auto ms = parse_citations("Both [2] and (Hsu et al., 2021).", NotationStyle::unknown);
    CHECK(ms.size() == 2);
  }

  TEST_CASE("canonical rendering") {
    CHECK(render_enumerated({1}) == "[1]");
    CHECK(render_enumerated({3, 1, 2, 2, 7, 8, 12, 10, 11}) == "[1-3, 7, 8, 10-12]");
    CHECK(render_enumerated({}) == "");
  }
}
