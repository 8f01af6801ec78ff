#include <array>
#include <cstdio>
#include <sstream>

#include <zlib.h>

#include "llmref/error.hpp"
#include "llmref/pdf.hpp"

namespace llmref::pdf {

namespace {

constexpr std::array<Writer::Font, 5> kFonts = {Writer::Font::times_roman, Writer::Font::times_bold,
                                                Writer::Font::times_italic, Writer::Font::helvetica,
                                                Writer::Font::helvetica_bold};

std::string resource_name(Writer::Font f) { return "F" + std::to_string(static_cast<int>(f) + 1); }

// Decodes one UTF-8 code point starting at i.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  int len = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : (c >= 0xC0) ? 2 : 1;
  char32_t cp = (len == 4) ? (c & 0x07) : (len == 3) ? (c & 0x0F) : (len == 2) ? (c & 0x1F) : c;
  for (int k = 1; k < len && i + k < s.size(); ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  i += len;
  return cp;
}

unsigned char to_win_ansi(char32_t cp) {
  if (cp < 0x80 || (cp >= 0xA0 && cp <= 0xFF)) return static_cast<unsigned char>(cp);
  switch (cp) {
    case 0x2018: return 0x91;
    case 0x2019: return 0x92;
    case 0x201C: return 0x93;
    case 0x201D: return 0x94;
    case 0x2022: return 0x95;
    case 0x2013: return 0x96;
    case 0x2014: return 0x97;
    case 0x2026: return 0x85;
    case 0x20AC: return 0x80;
    default: return '?';
  }
}

std::string pdf_literal(std::string_view utf8) {
  std::string out = "(";
  std::size_t i = 0;
  while (i < utf8.size()) {
    unsigned char b = to_win_ansi(next_code_point(utf8, i));
    if (b == '(' || b == ')' || b == '\\') {
      out.push_back('\\');
      out.push_back(static_cast<char>(b));
    } else if (b < 0x20 || b >= 0x7F) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\%03o", b);
      out += buf;
    } else {
      out.push_back(static_cast<char>(b));
    }
  }
  out.push_back(')');
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string deflate(const std::string& data) {
  uLongf bound = compressBound(static_cast<uLong>(data.size()));
  std::string out(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(out.data()), &bound, reinterpret_cast<const Bytef*>(data.data()),
                static_cast<uLong>(data.size()), Z_BEST_COMPRESSION) != Z_OK) {
    throw Error(Errc::io, "zlib compression failed");
  }
  out.resize(bound);
  return out;
}

}  // namespace

std::string_view Writer::base_font_name(Font font) {
  switch (font) {
    case Font::times_roman: return "Times-Roman";
    case Font::times_bold: return "Times-Bold";
    case Font::times_italic: return "Times-Italic";
    case Font::helvetica: return "Helvetica";
    case Font::helvetica_bold: return "Helvetica-Bold";
  }
  return "Times-Roman";
}

double approx_text_width(std::string_view utf8, double size) {
  std::size_t count = 0;
  for (unsigned char c : utf8) {
    if ((c & 0xC0) != 0x80) ++count;
  }
  return static_cast<double>(count) * 0.5 * size;
}

void Writer::new_page(double width, double height) { pages_.push_back({width, height, {}}); }

void Writer::text(double x, double y_from_top, Font font, double size, std::string_view utf8) {
  if (pages_.empty()) new_page();
  Page& p = pages_.back();
  p.content += "BT /" + resource_name(font) + " " + num(size) + " Tf " + num(x) + " " + num(p.height - y_from_top) +
               " Td " + pdf_literal(utf8) + " Tj ET\n";
}

void Writer::filled_rect(double x, double y_from_top, double w, double h) {
  if (pages_.empty()) new_page();
  Page& p = pages_.back();
  p.content += num(x) + " " + num(p.height - y_from_top - h) + " " + num(w) + " " + num(h) + " re f\n";
}

std::string Writer::finish() const {
  // Object layout: 1 catalog, 2 pages, 3..7 fonts, then per page: page, content.
  std::vector<std::string> objects;
  const int font_base = 3;
  const int page_base = font_base + static_cast<int>(kFonts.size());
  std::ostringstream kids;
  for (std::size_t i = 0; i < pages_.size(); ++i) kids << (page_base + 2 * i) << " 0 R ";
  objects.push_back("<< /Type /Catalog /Pages 2 0 R >>");
  objects.push_back("<< /Type /Pages /Kids [ " + kids.str() + "] /Count " + std::to_string(pages_.size()) + " >>");
  std::string font_resources = "<< ";
  for (auto f : kFonts) {
    objects.push_back("<< /Type /Font /Subtype /Type1 /BaseFont /" + std::string(base_font_name(f)) +
                      " /Encoding /WinAnsiEncoding >>");
    font_resources +=
        "/" + resource_name(f) + " " + std::to_string(font_base + static_cast<int>(f)) + " 0 R ";
  }
  font_resources += ">>";
  for (std::size_t i = 0; i < pages_.size(); ++i) {
    const Page& p = pages_[i];
    int content_obj = page_base + 2 * static_cast<int>(i) + 1;
    objects.push_back("<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + num(p.width) + " " + num(p.height) +
                      "] /Resources << /Font " + font_resources + " >> /Contents " + std::to_string(content_obj) +
                      " 0 R >>");
    std::string data = compress_ ? deflate(p.content) : p.content;
    std::string dict = "<< /Length " + std::to_string(data.size()) + (compress_ ? " /Filter /FlateDecode" : "") + " >>";
    objects.push_back(dict + "\nstream\n" + data + "\nendstream");
  }

  std::string out = "%PDF-1.4\n%\xE2\xE3\xCF\xD3\n";
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    offsets.push_back(out.size());
    out += std::to_string(i + 1) + " 0 obj\n" + objects[i] + "\nendobj\n";
  }
  std::size_t xref = out.size();
  out += "xref\n0 " + std::to_string(objects.size() + 1) + "\n0000000000 65535 f \n";
  for (auto off : offsets) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%010zu 00000 n \n", off);
    out += buf;
  }
  out += "trailer\n<< /Size " + std::to_string(objects.size() + 1) + " /Root 1 0 R >>\nstartxref\n" +
         std::to_string(xref) + "\n%%EOF\n";
  return out;
}

}  // namespace llmref::pdf
