#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace llmref {

// One run of same-font text on one baseline. Coordinates are points with
// the origin at the top-left of the page (y grows downwards), so y0 is the
// top of the run and y1 the baseline/bottom.
struct TextSpan {
  std::string text;
  int page = 1;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::string font;
  double size = 0;
  bool bold = false;

  double baseline() const { return y1; }
  bool operator==(const TextSpan&) const = default;
};

namespace pdf {

struct PageInfo {
  double width = 612;
  double height = 792;
};

struct TextLayer {
  std::vector<TextSpan> spans;  // content-stream order per page
  std::vector<PageInfo> pages;
};

// Reads the text layer of a PDF file. Throws Error(unsupported_document)
// for non-PDF input, encrypted files and files without any text.
TextLayer read_text_layer(std::span<const std::uint8_t> bytes);
TextLayer read_text_layer(std::string_view bytes);

// Minimal PDF producer using the standard Type 1 fonts. Text is given in
// UTF-8 and encoded as WinAnsi; y is the baseline measured from the top of
// the page.
class Writer {
 public:
  enum class Font { times_roman, times_bold, times_italic, helvetica, helvetica_bold };

  explicit Writer(bool compress = false) : compress_(compress) {}

  void new_page(double width = 612, double height = 792);
  void text(double x, double y_from_top, Font font, double size, std::string_view utf8);
  void filled_rect(double x, double y_from_top, double w, double h);
  std::size_t page_count() const { return pages_.size(); }

  std::string finish() const;

  static std::string_view base_font_name(Font font);

 private:
  struct Page {
    double width;
    double height;
    std::string content;
  };
  bool compress_;
  std::vector<Page> pages_;
};

// Approximate advance width of UTF-8 text for the standard fonts; the
// reader uses the same metric when a font carries no width table.
double approx_text_width(std::string_view utf8, double size);

}  // namespace pdf
}  // namespace llmref
