#include <doctest.h>

#include "llmref/error.hpp"
#include "llmref/pdf.hpp"

using namespace llmref;
using Font = pdf::Writer::Font;

namespace {

std::string sample(bool compress) {
  pdf::Writer w(compress);
  w.new_page();
  w.text(72, 100, Font::times_bold, 16, "A Title");
  w.text(72, 130, Font::times_roman, 10, "Body text with café and “quotes” – dash.");
  w.new_page(595, 842);
  w.text(300, 700, Font::helvetica, 9, "(parens) and \\backslash");
  return w.finish();
}

}  // namespace

TEST_SUITE("pdf") {
  TEST_CASE("writer output reads back") {
    for (bool compress : {false, true}) {
      CAPTURE(compress);
      auto layer = pdf::read_text_layer(sample(compress));
      REQUIRE(layer.pages.size() == 2);
      CHECK(layer.pages[1].width == doctest::Approx(595));
      CHECK(layer.pages[1].height == doctest::Approx(842));
      REQUIRE(layer.spans.size() == 3);
      const auto& t = layer.spans[0];
      CHECK(t.text == "A Title");
      CHECK(t.page == 1);
      CHECK(t.bold);
      CHECK(t.size == doctest::Approx(16));
      CHECK(t.x0 == doctest::Approx(72));
      CHECK(t.baseline() == doctest::Approx(100));
      CHECK(t.x1 == doctest::Approx(72 + pdf::approx_text_width("A Title", 16)));
      CHECK(layer.spans[1].text == "Body text with café and “quotes” – dash.");
      CHECK_FALSE(layer.spans[1].bold);
      CHECK(layer.spans[2].text == "(parens) and \\backslash");
      CHECK(layer.spans[2].page == 2);
      CHECK(layer.spans[2].baseline() == doctest::Approx(700));
    }
  }

  TEST_CASE("compression shrinks content") {
    pdf::Writer a(false), b(true);
    for (auto* w : {&a, &b}) {
      w->new_page();
      for (int i = 0; i < 60; ++i) w->text(72, 80 + i * 10, Font::times_roman, 10, "repeated body line of text");
    }
    CHECK(b.finish().size() < a.finish().size());
  }

  TEST_CASE("rejects what it cannot read") {
    auto code_of = [](std::string_view bytes) {
      try {
        pdf::read_text_layer(bytes);
      } catch (const Error& e) {
        return e.code();
      }
      return Errc::io;
    };
    CHECK(code_of("hello, not a pdf") == Errc::unsupported_document);
    pdf::Writer w;
    w.new_page();
    w.filled_rect(10, 10, 100, 100);
    CHECK(code_of(w.finish()) == Errc::unsupported_document);
    std::string enc = sample(false);
    enc.insert(enc.rfind("trailer") + 7, "\n<< /Encrypt 9 0 R >>");
    CHECK(code_of(enc) == Errc::unsupported_document);
  }
}
