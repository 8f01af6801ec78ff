#include <doctest.h>

#include "llmref/error.hpp"
#include "llmref/extractor.hpp"
#include "synthetic_article.hpp"

using namespace llmref;
using llmref::testing::golden_specs;
using llmref::testing::make_article;

TEST_SUITE("extractor") {
  TEST_CASE("golden synthetic articles are recovered exactly") {
    for (const auto& spec : golden_specs()) {
      auto art = make_article(spec);
      CAPTURE(spec.seed);
      auto doc = extract_document(art.pdf, "g" + std::to_string(spec.seed));
      auto diffs = llmref::testing::compare_extraction(art.manifest, doc);
      for (const auto& d : diffs) MESSAGE(d);
      CHECK(diffs.empty());
      CHECK(doc.title == art.manifest.title);
      CHECK(doc.page_count == art.manifest.pages);
      CHECK(doc.notation_style == spec.style);
    }
  }
}

namespace {

TextSpan span(std::string t, double x, double y, double size = 10, bool bold = false, int page = 1) {
  TextSpan s;
  s.text = std::move(t);
  s.page = page;
  s.x0 = x;
  s.x1 = x + pdf::approx_text_width(s.text, size);
  s.y1 = y;
  s.y0 = y - size;
  s.size = size;
  s.bold = bold;
  s.font = bold ? "Times-Bold" : "Times-Roman";
  return s;
}

}  // namespace

TEST_SUITE("extractor") {
  TEST_CASE("heading patterns") {
    auto n = match_heading_pattern("3.2 Discrete Units");
    REQUIRE(n);
    CHECK(n->kind == HeadingPattern::Kind::numbered);
    CHECK(n->label == "3.2");
    CHECK(n->title == "Discrete Units");
    CHECK(n->depth == 2);
    auto r = match_heading_pattern("IV. EXPERIMENTS");
    REQUIRE(r);
    CHECK(r->label == "IV");
    CHECK(r->depth == 1);
    auto k = match_heading_pattern("References");
    REQUIRE(k);
    CHECK(k->kind == HeadingPattern::Kind::keyword);
    auto l = match_heading_pattern("A. Ablation Study");
    REQUIRE(l);
    CHECK(l->kind == HeadingPattern::Kind::letter);
    CHECK_FALSE(match_heading_pattern("2021 was a year in which results improved a lot."));
    CHECK_FALSE(match_heading_pattern("150 Hz"));
    CHECK(is_bibliography_title("References"));
    CHECK(is_bibliography_title("Bibliography"));
    CHECK_FALSE(is_bibliography_title("Related Work"));
  }

  TEST_CASE("empty input") {
    CHECK_THROWS_AS(analyze_layout({}), Error);
  }

  TEST_CASE("layout profile of a small page") {
    std::vector<TextSpan> spans = {
        span("1 Introduction", 72, 100, 12, true),
        span("Direct translation maps source speech to target", 72, 120),
        span("speech without any intermediate text at all.", 72, 132),
        span("A second paragraph begins after a wider gap", 84, 150),
        span("and keeps going for one more line of text.", 72, 162),
    };
    auto prof = analyze_layout(spans);
    CHECK(prof.column_count == 1);
    CHECK(prof.body_font.size == doctest::Approx(10));
    CHECK_FALSE(prof.body_font.bold);
    auto hs = detect_headings(spans, prof);
    REQUIRE(hs.size() == 1);
    CHECK(hs[0].title == "Introduction");
    auto seg = segment_paragraphs(spans, prof, hs, "doc");
    REQUIRE(seg.root.children.size() == 1);
    const auto& sec = seg.root.children[0];
    REQUIRE(sec.paragraphs.size() == 2);
    CHECK(sec.paragraphs[0].text ==
          "Direct translation maps source speech to target speech without any intermediate text at all.");
    CHECK(sec.paragraphs[0].para_id == "doc/0.1/1");
  }

  TEST_CASE("reference list styles") {
    SectionNode root;
    SectionNode bib;
    bib.heading = "References";
    bib.depth = 1;
    Paragraph p1, p2;
    p1.text = "[1] Hsu, W. (2021). HuBERT. IEEE Trans. ASLP.";
    p2.text = "[2] Jia, Y. (2019). Direct S2ST. In Proc. Interspeech.";
    bib.paragraphs = {p1, p2};
    root.children.push_back(bib);
    auto refs = extract_reference_list(root);
    CHECK(refs.style == NotationStyle::enumerated);
    REQUIRE(refs.entries.size() == 2);
    CHECK(refs.entries[1].key == ReferenceKey{2});
    CHECK(refs.entries[1].raw == "Jia, Y. (2019). Direct S2ST. In Proc. Interspeech.");

    root.children[0].paragraphs[0].text = "Hsu, W., and Bolte, B. (2021). HuBERT. IEEE Trans. ASLP.";
    root.children[0].paragraphs[1].text = "Jia, Y., Weiss, R. J., et al. (2019a). Direct S2ST. In Proc. Interspeech.";
    auto named = extract_reference_list(root);
    CHECK(named.style == NotationStyle::named);
    REQUIRE(named.entries.size() == 2);
    CHECK(named.entries[0].key == ReferenceKey{NamedKey{{"Hsu"}, 2021, ""}});
    CHECK(named.entries[1].key == ReferenceKey{NamedKey{{"Jia"}, 2019, "a"}});
  }

  TEST_CASE("citations in body text resolve against the extracted bibliography") {
    auto specs = llmref::testing::golden_specs();
    auto art = make_article(specs[1]);
    auto doc = extract_document(art.pdf, "x");
    std::size_t markers = 0, resolved = 0;
    for_each_paragraph(doc.root, [&](const SectionNode&, const Paragraph& p) {
      for (const auto& m : p.markers) {
        ++markers;
        resolved += !m.unresolved;
      }
    });
    CHECK(markers > 0);
    CHECK(resolved == markers);
  }

  TEST_CASE("report json") {
    auto art = make_article(golden_specs()[3]);
    ExtractionReport rep;
    extract_document(art.pdf, "x", {}, &rep);
    auto j = rep.to_json();
    CHECK(j["profile"]["column_count"] == 2);
    CHECK(j["headings"].size() > 0);
  }
}
