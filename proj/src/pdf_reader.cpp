#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <variant>

#include <zlib.h>

#include "llmref/error.hpp"
#include "llmref/pdf.hpp"
#include "llmref/text.hpp"

namespace llmref::pdf {

namespace {

// ---------------------------------------------------------------------------
// Object model

struct Name {
  std::string v;
};
struct String {
  std::string bytes;
};
struct Ref {
  int num = 0;
  int gen = 0;
};
struct Keyword {
  std::string v;
};
struct Object;
using Array = std::vector<Object>;
using Dict = std::map<std::string, Object>;
struct Stream;

struct Object {
  std::variant<std::monostate, bool, double, String, Name, Array, Dict, Ref, std::shared_ptr<Stream>, Keyword> v;

  bool is_null() const { return std::holds_alternative<std::monostate>(v); }
  const Dict* dict() const;
  const Array* array() const { return std::get_if<Array>(&v); }
  const Name* name() const { return std::get_if<Name>(&v); }
  const String* string() const { return std::get_if<String>(&v); }
  const Ref* ref() const { return std::get_if<Ref>(&v); }
  const Keyword* keyword() const { return std::get_if<Keyword>(&v); }
  std::optional<double> number() const {
    if (const double* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
  }
  const Stream* stream() const {
    const auto* s = std::get_if<std::shared_ptr<Stream>>(&v);
    return s ? s->get() : nullptr;
  }
};

struct Stream {
  Dict dict;
  std::string raw;
};

const Dict* Object::dict() const {
  if (const Dict* d = std::get_if<Dict>(&v)) return d;
  if (const Stream* s = stream()) return &s->dict;
  return nullptr;
}

const Object kNull{};

const Object& lookup(const Dict& d, const std::string& key) {
  auto it = d.find(key);
  return it == d.end() ? kNull : it->second;
}

// ---------------------------------------------------------------------------
// Lexer / parser

bool is_ws(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\0'; }
bool is_delim(char c) {
  return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' || c == '}' || c == '/' ||
         c == '%';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

class Lexer {
 public:
  explicit Lexer(std::string_view s, std::size_t pos = 0) : s_(s), pos_(pos) {}

  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size();
  }

  void skip_ws() {
    while (pos_ < s_.size()) {
      if (is_ws(s_[pos_])) {
        ++pos_;
      } else if (s_[pos_] == '%') {
        while (pos_ < s_.size() && s_[pos_] != '\n' && s_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  // Parses one object. `allow_refs` enables "n g R" folding.
  Object parse(bool allow_refs = true, int depth = 0) {
    if (depth > 64) throw Error(Errc::malformed_input, "PDF nesting too deep");
    skip_ws();
    if (pos_ >= s_.size()) throw Error(Errc::malformed_input, "unexpected end of PDF data");
    char c = s_[pos_];
    if (c == '/') return Object{parse_name()};
    if (c == '(') return Object{parse_literal()};
    if (c == '<') {
      if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '<') return parse_dict(allow_refs, depth);
      return Object{parse_hex()};
    }
    if (c == '[') {
      ++pos_;
      Array arr;
      for (;;) {
        skip_ws();
        if (pos_ >= s_.size()) throw Error(Errc::malformed_input, "unterminated array");
        if (s_[pos_] == ']') {
          ++pos_;
          break;
        }
        arr.push_back(parse(allow_refs, depth + 1));
      }
      return Object{std::move(arr)};
    }
    if (c == ']' || c == '>' || c == ')' || c == '{' || c == '}') {
      ++pos_;
      return Object{Keyword{std::string(1, c)}};
    }
    if (c == '+' || c == '-' || c == '.' || (c >= '0' && c <= '9')) {
      std::size_t start = pos_;
      double value = parse_number();
      if (allow_refs && value >= 0 && std::floor(value) == value && s_.substr(start, pos_ - start).find('.') == std::string_view::npos) {
        std::size_t save = pos_;
        skip_ws();
        std::size_t gen_start = pos_;
        while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_;
        if (pos_ > gen_start) {
          int gen = std::atoi(std::string(s_.substr(gen_start, pos_ - gen_start)).c_str());
          skip_ws();
          if (pos_ < s_.size() && s_[pos_] == 'R' && (pos_ + 1 >= s_.size() || is_ws(s_[pos_ + 1]) || is_delim(s_[pos_ + 1]))) {
            ++pos_;
            return Object{Ref{static_cast<int>(value), gen}};
          }
        }
        pos_ = save;
      }
      return Object{value};
    }
    std::string word;
    while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) word.push_back(s_[pos_++]);
    if (word.empty()) {
      ++pos_;
      return Object{Keyword{std::string(1, c)}};
    }
    if (word == "true") return Object{true};
    if (word == "false") return Object{false};
    if (word == "null") return Object{};
    return Object{Keyword{std::move(word)}};
  }

  // Raw bytes; used to skip inline image data.
  std::string_view data() const { return s_; }

 private:
  Object parse_dict(bool allow_refs, int depth) {
    pos_ += 2;
    Dict d;
    for (;;) {
      skip_ws();
      if (pos_ + 1 >= s_.size()) throw Error(Errc::malformed_input, "unterminated dictionary");
      if (s_[pos_] == '>' && s_[pos_ + 1] == '>') {
        pos_ += 2;
        break;
      }
      Object key = parse(false, depth + 1);
      const Name* n = key.name();
      if (!n) continue;
      Object value = parse(allow_refs, depth + 1);
      d[n->v] = std::move(value);
    }
    return Object{std::move(d)};
  }

  Name parse_name() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) {
      char c = s_[pos_++];
      if (c == '#' && pos_ + 1 < s_.size() && hex_value(s_[pos_]) >= 0 && hex_value(s_[pos_ + 1]) >= 0) {
        out.push_back(static_cast<char>(hex_value(s_[pos_]) * 16 + hex_value(s_[pos_ + 1])));
        pos_ += 2;
      } else {
        out.push_back(c);
      }
    }
    return Name{out};
  }

  String parse_literal() {
    ++pos_;
    std::string out;
    int nesting = 1;
    while (pos_ < s_.size()) {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        char e = s_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 'r': out.push_back('\r'); break;
          case 't': out.push_back('\t'); break;
          case 'b': out.push_back('\b'); break;
          case 'f': out.push_back('\f'); break;
          case '\r':
            if (pos_ < s_.size() && s_[pos_] == '\n') ++pos_;
            break;
          case '\n': break;
          default:
            if (e >= '0' && e <= '7') {
              int v = e - '0';
              for (int k = 0; k < 2 && pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '7'; ++k) {
                v = v * 8 + (s_[pos_++] - '0');
              }
              out.push_back(static_cast<char>(v & 0xFF));
            } else {
              out.push_back(e);
            }
        }
      } else if (c == '(') {
        ++nesting;
        out.push_back(c);
      } else if (c == ')') {
        if (--nesting == 0) break;
        out.push_back(c);
      } else {
        out.push_back(c);
      }
    }
    return String{out};
  }

  String parse_hex() {
    ++pos_;
    std::string out;
    int hi = -1;
    while (pos_ < s_.size() && s_[pos_] != '>') {
      int v = hex_value(s_[pos_++]);
      if (v < 0) continue;
      if (hi < 0) {
        hi = v;
      } else {
        out.push_back(static_cast<char>(hi * 16 + v));
        hi = -1;
      }
    }
    if (hi >= 0) out.push_back(static_cast<char>(hi * 16));
    if (pos_ < s_.size()) ++pos_;
    return String{out};
  }

  double parse_number() {
    std::size_t start = pos_;
    if (s_[pos_] == '+' || s_[pos_] == '-') ++pos_;
    while (pos_ < s_.size() && ((s_[pos_] >= '0' && s_[pos_] <= '9') || s_[pos_] == '.')) ++pos_;
    std::string token(s_.substr(start, pos_ - start));
    if (token == "-" || token == "+" || token == "." || token == "-.") return 0.0;
    try {
      return std::stod(token);
    } catch (...) {
      return 0.0;
    }
  }

  std::string_view s_;
  std::size_t pos_;
};

// ---------------------------------------------------------------------------
// Stream filters

std::string inflate_data(std::string_view in) {
  std::string out;
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) return out;
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  char buf[16384];
  int rc = Z_OK;
  while (rc == Z_OK) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    out.append(buf, sizeof buf - zs.avail_out);
    if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
  }
  inflateEnd(&zs);
  return out;
}

std::string png_unpredict(const std::string& data, int columns, int colors, int bpc) {
  const int bpp = std::max(1, colors * bpc / 8);
  const int row_len = (columns * colors * bpc + 7) / 8;
  std::string out;
  std::vector<unsigned char> prev(row_len, 0), row(row_len);
  std::size_t pos = 0;
  while (pos + 1 + row_len <= data.size()) {
    int type = static_cast<unsigned char>(data[pos]);
    for (int i = 0; i < row_len; ++i) row[i] = static_cast<unsigned char>(data[pos + 1 + i]);
    for (int i = 0; i < row_len; ++i) {
      int left = i >= bpp ? row[i - bpp] : 0;
      int up = prev[i];
      int up_left = i >= bpp ? prev[i - bpp] : 0;
      switch (type) {
        case 1: row[i] = static_cast<unsigned char>(row[i] + left); break;
        case 2: row[i] = static_cast<unsigned char>(row[i] + up); break;
        case 3: row[i] = static_cast<unsigned char>(row[i] + (left + up) / 2); break;
        case 4: {
          int p = left + up - up_left;
          int pa = std::abs(p - left), pb = std::abs(p - up), pc = std::abs(p - up_left);
          int pred = (pa <= pb && pa <= pc) ? left : (pb <= pc ? up : up_left);
          row[i] = static_cast<unsigned char>(row[i] + pred);
          break;
        }
        default: break;
      }
    }
    out.append(reinterpret_cast<const char*>(row.data()), row_len);
    prev = row;
    pos += 1 + row_len;
  }
  return out;
}

std::string ascii_hex_decode(std::string_view in) {
  std::string out;
  int hi = -1;
  for (char c : in) {
    if (c == '>') break;
    int v = hex_value(c);
    if (v < 0) continue;
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<char>(hi * 16 + v));
      hi = -1;
    }
  }
  if (hi >= 0) out.push_back(static_cast<char>(hi * 16));
  return out;
}

std::string ascii85_decode(std::string_view in) {
  std::string out;
  std::uint32_t tuple = 0;
  int count = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    char c = in[i];
    if (c == '~') break;
    if (is_ws(c)) continue;
    if (c == 'z' && count == 0) {
      out.append(4, '\0');
      continue;
    }
    if (c < '!' || c > 'u') continue;
    tuple = tuple * 85 + static_cast<std::uint32_t>(c - '!');
    if (++count == 5) {
      for (int k = 3; k >= 0; --k) out.push_back(static_cast<char>((tuple >> (8 * k)) & 0xFF));
      tuple = 0;
      count = 0;
    }
  }
  if (count > 1) {
    for (int k = count; k < 5; ++k) tuple = tuple * 85 + 84;
    for (int k = 0; k < count - 1; ++k) out.push_back(static_cast<char>((tuple >> (8 * (3 - k))) & 0xFF));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Document

class Document {
 public:
  explicit Document(std::string_view data) : data_(data) {
    scan_objects();
    expand_object_streams();
  }

  const Object& get(int num) const {
    auto it = objects_.find(num);
    return it == objects_.end() ? kNull : it->second;
  }

  const Object& resolve(const Object& o, int depth = 0) const {
    if (const Ref* r = o.ref()) {
      if (depth > 32) return kNull;
      return resolve(get(r->num), depth + 1);
    }
    return o;
  }

  const Object& resolve_key(const Dict& d, const std::string& key) const { return resolve(lookup(d, key)); }

  std::string decode(const Stream& s) const {
    std::string data = s.raw;
    const Object& filter = resolve_key(s.dict, "Filter");
    const Object& parms = resolve_key(s.dict, "DecodeParms");
    std::vector<std::string> filters;
    std::vector<const Dict*> filter_parms;
    if (const Name* n = filter.name()) {
      filters.push_back(n->v);
      filter_parms.push_back(parms.dict());
    } else if (const Array* a = filter.array()) {
      for (std::size_t i = 0; i < a->size(); ++i) {
        if (const Name* n = resolve((*a)[i]).name()) filters.push_back(n->v);
        const Array* pa = parms.array();
        filter_parms.push_back(pa && i < pa->size() ? resolve((*pa)[i]).dict() : nullptr);
      }
    }
    for (std::size_t i = 0; i < filters.size(); ++i) {
      const std::string& f = filters[i];
      if (f == "FlateDecode" || f == "Fl") {
        data = inflate_data(data);
        if (const Dict* p = filter_parms[i]) {
          int predictor = static_cast<int>(resolve_key(*p, "Predictor").number().value_or(1));
          if (predictor >= 10) {
            data = png_unpredict(data, static_cast<int>(resolve_key(*p, "Columns").number().value_or(1)),
                                 static_cast<int>(resolve_key(*p, "Colors").number().value_or(1)),
                                 static_cast<int>(resolve_key(*p, "BitsPerComponent").number().value_or(8)));
          }
        }
      } else if (f == "ASCIIHexDecode" || f == "AHx") {
        data = ascii_hex_decode(data);
      } else if (f == "ASCII85Decode" || f == "A85") {
        data = ascii85_decode(data);
      } else {
        // Image codecs and LZW carry no text for our purposes.
        return {};
      }
    }
    return data;
  }

  bool encrypted() const {
    for (const auto& t : trailers_) {
      if (t.count("Encrypt")) return true;
    }
    return false;
  }

  std::vector<std::pair<const Dict*, const Dict*>> pages() const;  // (page, inherited resources)

  const std::map<int, Object>& objects() const { return objects_; }

 private:
  void scan_objects();
  void expand_object_streams();
  void parse_stream_body(Lexer& lex, Dict dict, Object& out);

  std::string_view data_;
  std::map<int, Object> objects_;
  std::vector<Dict> trailers_;
};

void Document::parse_stream_body(Lexer& lex, Dict dict, Object& out) {
  std::size_t p = lex.pos();
  // "stream" keyword was consumed; data starts after the EOL.
  if (p < data_.size() && data_[p] == '\r') ++p;
  if (p < data_.size() && data_[p] == '\n') ++p;
  std::size_t end = std::string_view::npos;
  const Object& len_obj = lookup(dict, "Length");
  if (auto len = len_obj.number()) {
    std::size_t candidate = p + static_cast<std::size_t>(*len);
    if (candidate <= data_.size()) {
      std::size_t q = candidate;
      while (q < data_.size() && is_ws(data_[q])) ++q;
      if (data_.substr(q, 9) == "endstream") end = candidate;
    }
  }
  if (end == std::string_view::npos) {
    std::size_t found = data_.find("endstream", p);
    end = found == std::string_view::npos ? data_.size() : found;
    // Trim the EOL preceding endstream.
    while (end > p && (data_[end - 1] == '\n' || data_[end - 1] == '\r')) --end;
  }
  auto s = std::make_shared<Stream>();
  s->dict = std::move(dict);
  s->raw = std::string(data_.substr(p, end - p));
  out = Object{s};
  std::size_t after = data_.find("endstream", end);
  lex.seek(after == std::string_view::npos ? data_.size() : after + 9);
}

void Document::scan_objects() {
  std::size_t pos = 0;
  while (pos < data_.size()) {
    std::size_t hit = data_.find("obj", pos);
    std::size_t trailer = data_.find("trailer", pos);
    if (trailer != std::string_view::npos && (hit == std::string_view::npos || trailer < hit)) {
      Lexer lex(data_, trailer + 7);
      try {
        Object t = lex.parse();
        if (const Dict* d = t.dict()) trailers_.push_back(*d);
      } catch (const Error&) {
      }
      pos = trailer + 7;
      continue;
    }
    if (hit == std::string_view::npos) break;
    pos = hit + 3;
    if (hit + 3 < data_.size() && !is_ws(data_[hit + 3]) && !is_delim(data_[hit + 3])) continue;
    // Walk back over "<num> <gen> ".
    std::size_t q = hit;
    if (q == 0 || !is_ws(data_[q - 1])) continue;
    while (q > 0 && is_ws(data_[q - 1])) --q;
    std::size_t gen_end = q;
    while (q > 0 && data_[q - 1] >= '0' && data_[q - 1] <= '9') --q;
    if (q == gen_end || q == 0 || !is_ws(data_[q - 1])) continue;
    while (q > 0 && is_ws(data_[q - 1])) --q;
    std::size_t num_end = q;
    while (q > 0 && data_[q - 1] >= '0' && data_[q - 1] <= '9') --q;
    if (q == num_end) continue;
    if (q > 0 && !is_ws(data_[q - 1]) && !is_delim(data_[q - 1])) continue;
    int num = std::atoi(std::string(data_.substr(q, num_end - q)).c_str());
    Lexer lex(data_, hit + 3);
    try {
      Object o = lex.parse();
      std::size_t after_obj = lex.pos();
      lex.skip_ws();
      if (o.dict() && data_.substr(lex.pos(), 6) == "stream") {
        lex.seek(lex.pos() + 6);
        Dict d = *o.dict();
        parse_stream_body(lex, std::move(d), o);
        after_obj = lex.pos();
      }
      if (const Stream* s = o.stream()) {
        const Object& type = lookup(s->dict, "Type");
        if (type.name() && type.name()->v == "XRef") trailers_.push_back(s->dict);
      }
      objects_[num] = std::move(o);
      pos = after_obj;
    } catch (const Error&) {
      // Unparseable object: keep scanning.
    }
  }
}

void Document::expand_object_streams() {
  std::vector<std::pair<int, Object>> extra;
  for (const auto& [num, obj] : objects_) {
    const Stream* s = obj.stream();
    if (!s) continue;
    const Object& type = lookup(s->dict, "Type");
    if (!type.name() || type.name()->v != "ObjStm") continue;
    std::string data = decode(*s);
    int n = static_cast<int>(resolve_key(s->dict, "N").number().value_or(0));
    std::size_t first = static_cast<std::size_t>(resolve_key(s->dict, "First").number().value_or(0));
    Lexer header(data);
    std::vector<std::pair<int, std::size_t>> entries;
    try {
      for (int i = 0; i < n; ++i) {
        auto a = header.parse(false).number();
        auto b = header.parse(false).number();
        if (!a || !b) break;
        entries.emplace_back(static_cast<int>(*a), static_cast<std::size_t>(*b));
      }
      for (const auto& [onum, off] : entries) {
        if (first + off >= data.size()) continue;
        Lexer body(data, first + off);
        extra.emplace_back(onum, body.parse());
      }
    } catch (const Error&) {
    }
  }
  for (auto& [onum, o] : extra) {
    auto& slot = objects_[onum];
    if (slot.is_null()) slot = std::move(o);
  }
}

std::vector<std::pair<const Dict*, const Dict*>> Document::pages() const {
  std::vector<std::pair<const Dict*, const Dict*>> out;
  const Dict* catalog = nullptr;
  for (const auto& t : trailers_) {
    if (const Dict* d = resolve_key(t, "Root").dict()) {
      catalog = d;
    }
  }
  if (!catalog) {
    for (const auto& [num, o] : objects_) {
      const Dict* d = o.dict();
      if (!d) continue;
      const Name* type = resolve_key(*d, "Type").name();
      if (type && type->v == "Catalog") catalog = d;
    }
  }
  std::function<void(const Dict*, const Dict*, int)> walk = [&](const Dict* node, const Dict* res, int depth) {
    if (!node || depth > 32) return;
    const Dict* own_res = resolve_key(*node, "Resources").dict();
    const Dict* effective = own_res ? own_res : res;
    const Name* type = resolve_key(*node, "Type").name();
    const Array* kids = resolve_key(*node, "Kids").array();
    if (kids && (!type || type->v == "Pages")) {
      for (const auto& k : *kids) walk(resolve(k).dict(), effective, depth + 1);
      return;
    }
    out.emplace_back(node, effective);
  };
  if (catalog) walk(resolve_key(*catalog, "Pages").dict(), nullptr, 0);
  if (out.empty()) {
    for (const auto& [num, o] : objects_) {
      const Dict* d = o.dict();
      if (!d) continue;
      const Name* type = resolve_key(*d, "Type").name();
      if (type && type->v == "Page") out.emplace_back(d, resolve_key(*d, "Resources").dict());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fonts

std::string utf8_of(char32_t cp) {
  std::string out;
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
  return out;
}

std::string utf16be_to_utf8(std::string_view bytes) {
  std::string out;
  for (std::size_t i = 0; i + 1 < bytes.size(); i += 2) {
    char32_t u = (static_cast<unsigned char>(bytes[i]) << 8) | static_cast<unsigned char>(bytes[i + 1]);
    if (u >= 0xD800 && u <= 0xDBFF && i + 3 < bytes.size()) {
      char32_t lo = (static_cast<unsigned char>(bytes[i + 2]) << 8) | static_cast<unsigned char>(bytes[i + 3]);
      u = 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00);
      i += 2;
    }
    out += utf8_of(u);
  }
  return out;
}

char32_t win_ansi(unsigned char b) {
  static constexpr char32_t high[32] = {0x20AC, 0,      0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021,
                                        0x02C6, 0x2030, 0x0160, 0x2039, 0x0152, 0,      0x017D, 0,
                                        0,      0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
                                        0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0,      0x017E, 0x0178};
  if (b >= 0x80 && b < 0xA0) return high[b - 0x80] ? high[b - 0x80] : '?';
  return b;
}

std::optional<std::string> glyph_name_to_utf8(const std::string& name) {
  static const std::unordered_map<std::string, char32_t> names = {
      {"space", ' '},         {"exclam", '!'},        {"quotedbl", '"'},       {"numbersign", '#'},
      {"dollar", '$'},        {"percent", '%'},       {"ampersand", '&'},      {"quoteright", 0x2019},
      {"quotesingle", '\''},  {"parenleft", '('},     {"parenright", ')'},     {"asterisk", '*'},
      {"plus", '+'},          {"comma", ','},         {"hyphen", '-'},         {"period", '.'},
      {"slash", '/'},         {"zero", '0'},          {"one", '1'},            {"two", '2'},
      {"three", '3'},         {"four", '4'},          {"five", '5'},           {"six", '6'},
      {"seven", '7'},         {"eight", '8'},         {"nine", '9'},           {"colon", ':'},
      {"semicolon", ';'},     {"less", '<'},          {"equal", '='},          {"greater", '>'},
      {"question", '?'},      {"at", '@'},            {"bracketleft", '['},    {"backslash", '\\'},
      {"bracketright", ']'},  {"asciicircum", '^'},   {"underscore", '_'},     {"quoteleft", 0x2018},
      {"grave", '`'},         {"braceleft", '{'},     {"bar", '|'},            {"braceright", '}'},
      {"asciitilde", '~'},    {"quotedblleft", 0x201C}, {"quotedblright", 0x201D}, {"endash", 0x2013},
      {"emdash", 0x2014},     {"bullet", 0x2022},     {"ellipsis", 0x2026},    {"dagger", 0x2020},
      {"daggerdbl", 0x2021},  {"section", 0xA7},      {"degree", 0xB0},        {"copyright", 0xA9},
      {"registered", 0xAE},   {"eacute", 0xE9},       {"egrave", 0xE8},        {"aacute", 0xE1},
      {"agrave", 0xE0},       {"oacute", 0xF3},       {"iacute", 0xED},        {"uacute", 0xFA},
      {"udieresis", 0xFC},    {"odieresis", 0xF6},    {"adieresis", 0xE4},     {"ccedilla", 0xE7},
      {"ntilde", 0xF1},       {"germandbls", 0xDF},   {"dotlessi", 0x131},     {"minus", 0x2212},
      {"multiply", 0xD7},     {"periodcentered", 0xB7}, {"nbspace", ' '},      {"quotesinglbase", 0x201A},
  };
  static const std::unordered_map<std::string, std::string> ligatures = {
      {"fi", "fi"}, {"fl", "fl"}, {"ff", "ff"}, {"ffi", "ffi"}, {"ffl", "ffl"}};
  if (name.size() == 1 && text::is_ascii_alpha(name[0])) return name;
  if (auto it = names.find(name); it != names.end()) return utf8_of(it->second);
  if (auto it = ligatures.find(name); it != ligatures.end()) return it->second;
  if (name.size() == 7 && name.rfind("uni", 0) == 0) {
    char32_t cp = 0;
    for (std::size_t i = 3; i < 7; ++i) {
      int v = hex_value(name[i]);
      if (v < 0) return std::nullopt;
      cp = cp * 16 + v;
    }
    return utf8_of(cp);
  }
  return std::nullopt;
}

struct FontInfo {
  std::string name = "unknown";
  bool bold = false;
  int code_bytes = 1;
  std::map<std::uint32_t, std::string> to_unicode;
  std::map<std::uint32_t, std::string> differences;
  std::map<std::uint32_t, double> widths;  // glyph space (1/1000 em)
  double default_width = 500;

  double width(std::uint32_t code) const {
    auto it = widths.find(code);
    return it == widths.end() ? default_width : it->second;
  }

  std::string decode(std::uint32_t code) const {
    if (auto it = to_unicode.find(code); it != to_unicode.end()) return it->second;
    if (auto it = differences.find(code); it != differences.end()) return it->second;
    if (code_bytes == 2) return code < 0x80 && code >= 0x20 ? std::string(1, static_cast<char>(code)) : std::string();
    if (code < 0x20) return {};
    return utf8_of(win_ansi(static_cast<unsigned char>(code)));
  }
};

void parse_cmap(std::string_view cmap, FontInfo& font) {
  Lexer lex(cmap);
  std::vector<Object> operands;
  auto code_of = [](const std::string& bytes) {
    std::uint32_t v = 0;
    for (unsigned char c : bytes) v = (v << 8) | c;
    return v;
  };
  try {
    while (!lex.at_end()) {
      Object o = lex.parse(false);
      const Keyword* kw = o.keyword();
      if (!kw) {
        operands.push_back(std::move(o));
        continue;
      }
      if (kw->v == "endcodespacerange") {
        if (!operands.empty() && operands[0].string()) {
          font.code_bytes = static_cast<int>(std::max<std::size_t>(1, operands[0].string()->bytes.size()));
        }
      } else if (kw->v == "endbfchar") {
        for (std::size_t i = 0; i + 1 < operands.size(); i += 2) {
          const String* src = operands[i].string();
          const String* dst = operands[i + 1].string();
          if (src && dst) font.to_unicode[code_of(src->bytes)] = utf16be_to_utf8(dst->bytes);
        }
      } else if (kw->v == "endbfrange") {
        for (std::size_t i = 0; i + 2 < operands.size(); i += 3) {
          const String* lo = operands[i].string();
          const String* hi = operands[i + 1].string();
          if (!lo || !hi) continue;
          std::uint32_t a = code_of(lo->bytes), b = code_of(hi->bytes);
          if (b < a || b - a > 65535) continue;
          if (const String* dst = operands[i + 2].string()) {
            std::string base = dst->bytes;
            for (std::uint32_t c = a; c <= b; ++c) {
              font.to_unicode[c] = utf16be_to_utf8(base);
              if (!base.empty()) base.back() = static_cast<char>(static_cast<unsigned char>(base.back()) + 1);
            }
          } else if (const Array* arr = operands[i + 2].array()) {
            for (std::uint32_t c = a; c <= b && c - a < arr->size(); ++c) {
              if (const String* s = (*arr)[c - a].string()) font.to_unicode[c] = utf16be_to_utf8(s->bytes);
            }
          }
        }
      }
      operands.clear();
    }
  } catch (const Error&) {
  }
}

bool name_is_bold(const std::string& name) {
  std::string lower = text::to_lower(name);
  return lower.find("bold") != std::string::npos || lower.find("black") != std::string::npos ||
         lower.find("heavy") != std::string::npos || lower.find("semibold") != std::string::npos ||
         lower.find("demi") != std::string::npos || lower.find(".b") != std::string::npos ||
         (lower.size() > 4 && lower.rfind("cmbx", 0) == 0);
}

FontInfo load_font(const Document& doc, const Dict* font) {
  FontInfo info;
  if (!font) return info;
  if (const Name* base = doc.resolve_key(*font, "BaseFont").name()) {
    info.name = base->v;
    auto plus = info.name.find('+');
    if (plus == 6) info.name = info.name.substr(7);
  }
  info.bold = name_is_bold(info.name);
  const Dict* descriptor = doc.resolve_key(*font, "FontDescriptor").dict();
  const Name* subtype = doc.resolve_key(*font, "Subtype").name();
  if (subtype && subtype->v == "Type0") {
    info.code_bytes = 2;
    if (const Array* desc = doc.resolve_key(*font, "DescendantFonts").array(); desc && !desc->empty()) {
      if (const Dict* cid = doc.resolve((*desc)[0]).dict()) {
        descriptor = doc.resolve_key(*cid, "FontDescriptor").dict();
        info.default_width = doc.resolve_key(*cid, "DW").number().value_or(1000);
        if (const Array* w = doc.resolve_key(*cid, "W").array()) {
          std::size_t i = 0;
          while (i < w->size()) {
            auto c1 = doc.resolve((*w)[i]).number();
            if (!c1 || i + 1 >= w->size()) break;
            const Object& next = doc.resolve((*w)[i + 1]);
            if (const Array* list = next.array()) {
              for (std::size_t k = 0; k < list->size(); ++k) {
                info.widths[static_cast<std::uint32_t>(*c1) + static_cast<std::uint32_t>(k)] =
                    doc.resolve((*list)[k]).number().value_or(info.default_width);
              }
              i += 2;
            } else if (i + 2 < w->size()) {
              auto c2 = next.number();
              auto width = doc.resolve((*w)[i + 2]).number();
              if (c2 && width && *c2 >= *c1 && *c2 - *c1 < 65536) {
                for (auto c = static_cast<std::uint32_t>(*c1); c <= static_cast<std::uint32_t>(*c2); ++c) {
                  info.widths[c] = *width;
                }
              }
              i += 3;
            } else {
              break;
            }
          }
        }
      }
    }
  } else {
    auto first = doc.resolve_key(*font, "FirstChar").number();
    if (const Array* w = doc.resolve_key(*font, "Widths").array(); w && first) {
      for (std::size_t k = 0; k < w->size(); ++k) {
        info.widths[static_cast<std::uint32_t>(*first) + static_cast<std::uint32_t>(k)] =
            doc.resolve((*w)[k]).number().value_or(500);
      }
    }
    const Object& enc = doc.resolve_key(*font, "Encoding");
    if (const Dict* ed = enc.dict()) {
      if (const Array* diffs = doc.resolve_key(*ed, "Differences").array()) {
        std::uint32_t code = 0;
        for (const auto& item : *diffs) {
          const Object& r = doc.resolve(item);
          if (auto n = r.number()) {
            code = static_cast<std::uint32_t>(*n);
          } else if (const Name* gn = r.name()) {
            if (auto u = glyph_name_to_utf8(gn->v)) info.differences[code] = *u;
            ++code;
          }
        }
      }
    }
  }
  if (descriptor) {
    double weight = doc.resolve_key(*descriptor, "FontWeight").number().value_or(0);
    int flags = static_cast<int>(doc.resolve_key(*descriptor, "Flags").number().value_or(0));
    if (weight >= 600 || (flags & (1 << 18))) info.bold = true;
    if (auto mw = doc.resolve_key(*descriptor, "MissingWidth").number(); mw && *mw > 0 && info.code_bytes == 1) {
      info.default_width = *mw;
    }
  }
  if (const Stream* tu = doc.resolve_key(*font, "ToUnicode").stream()) parse_cmap(doc.decode(*tu), info);
  return info;
}

// ---------------------------------------------------------------------------
// Content interpretation

struct Matrix {
  double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;
};

Matrix multiply(const Matrix& m, const Matrix& n) {
  return {m.a * n.a + m.b * n.c,       m.a * n.b + m.b * n.d,       m.c * n.a + m.d * n.c,
          m.c * n.b + m.d * n.d,       m.e * n.a + m.f * n.c + n.e, m.e * n.b + m.f * n.d + n.f};
}

struct Glyph {
  std::string text;
  double x0, x1, y, size;
};

struct GraphicsState {
  Matrix ctm;
  const FontInfo* font = nullptr;
  double font_size = 0;
  double char_spacing = 0;
  double word_spacing = 0;
  double horiz_scale = 1;
  double leading = 0;
  double rise = 0;
};

class PageInterpreter {
 public:
  PageInterpreter(const Document& doc, int page_no, double page_height, double origin_x, double origin_y,
                  std::vector<TextSpan>& out)
      : doc_(doc), page_no_(page_no), page_height_(page_height), origin_x_(origin_x), origin_y_(origin_y), out_(out) {}

  void run(const std::string& content, const Dict* resources, int depth = 0) {
    if (depth > 6) return;
    Lexer lex(content);
    std::vector<Object> ops;
    while (true) {
      Object o;
      try {
        if (lex.at_end()) break;
        o = lex.parse(false);
      } catch (const Error&) {
        break;
      }
      const Keyword* kw = o.keyword();
      if (!kw) {
        ops.push_back(std::move(o));
        continue;
      }
      if (kw->v == "BI") {
        skip_inline_image(lex);
      } else {
        apply(kw->v, ops, resources, depth);
      }
      ops.clear();
    }
    flush();
  }

 private:
  static double num(const std::vector<Object>& ops, std::size_t i) {
    if (i >= ops.size()) return 0;
    return ops[i].number().value_or(0);
  }

  void skip_inline_image(Lexer& lex) {
    std::string_view data = lex.data();
    std::size_t p = lex.pos();
    std::size_t id = data.find("ID", p);
    if (id == std::string_view::npos) {
      lex.seek(data.size());
      return;
    }
    std::size_t q = id + 2;
    while (q + 2 <= data.size()) {
      std::size_t ei = data.find("EI", q);
      if (ei == std::string_view::npos) {
        lex.seek(data.size());
        return;
      }
      bool before = ei > 0 && is_ws(data[ei - 1]);
      bool after = ei + 2 >= data.size() || is_ws(data[ei + 2]);
      if (before && after) {
        lex.seek(ei + 2);
        return;
      }
      q = ei + 2;
    }
    lex.seek(data.size());
  }

  const FontInfo* font_for(const Dict* resources, const std::string& name) {
    if (!resources) return nullptr;
    const Dict* fonts = doc_.resolve_key(*resources, "Font").dict();
    if (!fonts) return nullptr;
    const Object& ref = lookup(*fonts, name);
    const Dict* fd = doc_.resolve(ref).dict();
    if (!fd) return nullptr;
    auto it = font_cache_.find(fd);
    if (it == font_cache_.end()) it = font_cache_.emplace(fd, load_font(doc_, fd)).first;
    return &it->second;
  }

  void apply(const std::string& op, const std::vector<Object>& ops, const Dict* resources, int depth) {
    GraphicsState& gs = stack_.back();
    if (op == "q") {
      stack_.push_back(gs);
    } else if (op == "Q") {
      if (stack_.size() > 1) stack_.pop_back();
    } else if (op == "cm" && ops.size() >= 6) {
      Matrix m{num(ops, 0), num(ops, 1), num(ops, 2), num(ops, 3), num(ops, 4), num(ops, 5)};
      gs.ctm = multiply(m, gs.ctm);
    } else if (op == "BT") {
      tm_ = Matrix{};
      tlm_ = Matrix{};
    } else if (op == "ET") {
    } else if (op == "Tf" && ops.size() >= 2) {
      if (const Name* n = ops[0].name()) gs.font = font_for(resources, n->v);
      gs.font_size = num(ops, 1);
    } else if (op == "Tc") {
      gs.char_spacing = num(ops, 0);
    } else if (op == "Tw") {
      gs.word_spacing = num(ops, 0);
    } else if (op == "Tz") {
      gs.horiz_scale = num(ops, 0) / 100.0;
    } else if (op == "TL") {
      gs.leading = num(ops, 0);
    } else if (op == "Ts") {
      gs.rise = num(ops, 0);
    } else if (op == "Td") {
      tlm_ = multiply(Matrix{1, 0, 0, 1, num(ops, 0), num(ops, 1)}, tlm_);
      tm_ = tlm_;
    } else if (op == "TD") {
      gs.leading = -num(ops, 1);
      tlm_ = multiply(Matrix{1, 0, 0, 1, num(ops, 0), num(ops, 1)}, tlm_);
      tm_ = tlm_;
    } else if (op == "Tm" && ops.size() >= 6) {
      tlm_ = Matrix{num(ops, 0), num(ops, 1), num(ops, 2), num(ops, 3), num(ops, 4), num(ops, 5)};
      tm_ = tlm_;
    } else if (op == "T*") {
      next_line(gs);
    } else if (op == "Tj" && !ops.empty()) {
      if (const String* s = ops[0].string()) show(gs, s->bytes);
    } else if (op == "'" && !ops.empty()) {
      next_line(gs);
      if (const String* s = ops[0].string()) show(gs, s->bytes);
    } else if (op == "\"" && ops.size() >= 3) {
      gs.word_spacing = num(ops, 0);
      gs.char_spacing = num(ops, 1);
      next_line(gs);
      if (const String* s = ops[2].string()) show(gs, s->bytes);
    } else if (op == "TJ" && !ops.empty()) {
      if (const Array* arr = ops[0].array()) {
        for (const auto& item : *arr) {
          if (const String* s = item.string()) {
            show(gs, s->bytes);
          } else if (auto adj = item.number()) {
            double tx = -*adj / 1000.0 * gs.font_size * gs.horiz_scale;
            tm_ = multiply(Matrix{1, 0, 0, 1, tx, 0}, tm_);
          }
        }
      }
    } else if (op == "Do" && !ops.empty() && resources) {
      const Name* n = ops[0].name();
      const Dict* xobjects = doc_.resolve_key(*resources, "XObject").dict();
      if (!n || !xobjects) return;
      const Stream* xs = doc_.resolve(lookup(*xobjects, n->v)).stream();
      if (!xs) return;
      const Name* subtype = doc_.resolve_key(xs->dict, "Subtype").name();
      if (!subtype || subtype->v != "Form") return;
      stack_.push_back(gs);
      if (const Array* m = doc_.resolve_key(xs->dict, "Matrix").array(); m && m->size() == 6) {
        Matrix fm{(*m)[0].number().value_or(1), (*m)[1].number().value_or(0), (*m)[2].number().value_or(0),
                  (*m)[3].number().value_or(1), (*m)[4].number().value_or(0), (*m)[5].number().value_or(0)};
        stack_.back().ctm = multiply(fm, stack_.back().ctm);
      }
      const Dict* form_res = doc_.resolve_key(xs->dict, "Resources").dict();
      Matrix saved_tm = tm_, saved_tlm = tlm_;
      run_nested(doc_.decode(*xs), form_res ? form_res : resources, depth + 1);
      tm_ = saved_tm;
      tlm_ = saved_tlm;
      stack_.pop_back();
    }
  }

  void run_nested(const std::string& content, const Dict* resources, int depth) {
    Lexer lex(content);
    std::vector<Object> ops;
    while (true) {
      Object o;
      try {
        if (lex.at_end()) break;
        o = lex.parse(false);
      } catch (const Error&) {
        break;
      }
      const Keyword* kw = o.keyword();
      if (!kw) {
        ops.push_back(std::move(o));
        continue;
      }
      if (kw->v == "BI") {
        skip_inline_image(lex);
      } else {
        apply(kw->v, ops, resources, depth);
      }
      ops.clear();
    }
  }

  void next_line(const GraphicsState& gs) {
    tlm_ = multiply(Matrix{1, 0, 0, 1, 0, -gs.leading}, tlm_);
    tm_ = tlm_;
  }

  void show(const GraphicsState& gs, const std::string& bytes) {
    static const FontInfo fallback;
    const FontInfo& font = gs.font ? *gs.font : fallback;
    const int step = font.code_bytes;
    for (std::size_t i = 0; i + step <= bytes.size(); i += step) {
      std::uint32_t code = 0;
      for (int k = 0; k < step; ++k) code = (code << 8) | static_cast<unsigned char>(bytes[i + k]);
      double w0 = font.width(code) / 1000.0;
      double tx = (w0 * gs.font_size + gs.char_spacing + (step == 1 && code == 32 ? gs.word_spacing : 0)) *
                  gs.horiz_scale;
      Matrix trm = multiply(Matrix{gs.font_size * gs.horiz_scale, 0, 0, gs.font_size, 0, gs.rise},
                            multiply(tm_, gs.ctm));
      Matrix text_to_user = multiply(tm_, gs.ctm);
      double start_x = trm.e;
      double start_y = trm.f;
      tm_ = multiply(Matrix{1, 0, 0, 1, tx, 0}, tm_);
      Matrix after = multiply(tm_, gs.ctm);
      double end_x = after.e;
      double size = std::sqrt(trm.c * trm.c + trm.d * trm.d);
      bool horizontal = std::abs(text_to_user.b) <= 0.1 * std::abs(text_to_user.a) && text_to_user.a > 0;
      if (!horizontal || size <= 0.1) continue;
      std::string t = font.decode(code);
      if (t.empty()) continue;
      add_glyph({t, start_x, std::max(end_x, start_x + 0.01), start_y, size}, font);
    }
  }

  void add_glyph(const Glyph& g, const FontInfo& font) {
    const double size = g.size;
    const bool blank = text::trim(g.text).empty();
    bool same_run = current_ && current_font_name_ == font.name && current_->bold == font.bold &&
                    std::abs(current_->size - size) < 0.05 * size && std::abs(current_y_ - g.y) < 0.25 * size &&
                    g.x0 > current_x1_ - 0.6 * size && g.x0 - current_x1_ < 1.0 * size;
    if (blank) {
      // Spaces never start a run and never extend its right edge, so the
      // gap to the next glyph (or span) still shows the word break.
      if (same_run && current_->text.back() != ' ') current_->text.push_back(' ');
      return;
    }
    if (!same_run) {
      flush();
      current_ = TextSpan{};
      current_->page = page_no_;
      current_->font = font.name;
      current_->bold = font.bold;
      current_->size = size;
      current_x0_ = g.x0;
      current_y_ = g.y;
      current_font_name_ = font.name;
      current_x1_ = g.x1;
    } else if (g.x0 - current_x1_ > 0.12 * size && current_->text.back() != ' ') {
      current_->text.push_back(' ');
    }
    current_->text += g.text;
    current_x1_ = std::max(current_x1_, g.x1);
  }

  void flush() {
    if (!current_) return;
    TextSpan span = std::move(*current_);
    current_.reset();
    span.text = text::normalize_whitespace(span.text);
    if (span.text.empty()) return;
    double baseline = page_height_ - (current_y_ - origin_y_);
    span.x0 = current_x0_ - origin_x_;
    span.x1 = std::max(current_x1_ - origin_x_, span.x0 + 0.1);
    span.y1 = baseline;
    span.y0 = baseline - span.size;
    out_.push_back(std::move(span));
  }

  const Document& doc_;
  int page_no_;
  double page_height_;
  double origin_x_;
  double origin_y_;
  std::vector<TextSpan>& out_;
  std::vector<GraphicsState> stack_{GraphicsState{}};
  Matrix tm_, tlm_;
  std::map<const Dict*, FontInfo> font_cache_;
  std::optional<TextSpan> current_;
  std::string current_font_name_;
  double current_x0_ = 0, current_x1_ = 0, current_y_ = 0;
};

}  // namespace

TextLayer read_text_layer(std::string_view bytes) {
  std::size_t header = bytes.substr(0, 1024).find("%PDF-");
  if (header == std::string_view::npos) {
    throw Error(Errc::unsupported_document, "unsupported document: not a PDF file");
  }
  Document doc(bytes.substr(header));
  if (doc.encrypted()) throw Error(Errc::unsupported_document, "unsupported document: PDF is encrypted");
  TextLayer layer;
  auto pages = doc.pages();
  if (pages.empty()) throw Error(Errc::unsupported_document, "unsupported document: PDF has no pages");
  int page_no = 0;
  for (const auto& [page, resources] : pages) {
    ++page_no;
    PageInfo info;
    double ox = 0, oy = 0;
    const Array* box = doc.resolve_key(*page, "MediaBox").array();
    if (!box) {
      // MediaBox is inheritable; look up the parent chain.
      const Dict* node = page;
      for (int guard = 0; node && !box && guard < 32; ++guard) {
        node = doc.resolve_key(*node, "Parent").dict();
        if (node) box = doc.resolve_key(*node, "MediaBox").array();
      }
    }
    if (box && box->size() == 4) {
      ox = doc.resolve((*box)[0]).number().value_or(0);
      oy = doc.resolve((*box)[1]).number().value_or(0);
      info.width = doc.resolve((*box)[2]).number().value_or(612) - ox;
      info.height = doc.resolve((*box)[3]).number().value_or(792) - oy;
    }
    layer.pages.push_back(info);
    std::string content;
    const Object& contents = doc.resolve_key(*page, "Contents");
    if (const Stream* s = contents.stream()) {
      content = doc.decode(*s);
    } else if (const Array* arr = contents.array()) {
      for (const auto& part : *arr) {
        if (const Stream* s = doc.resolve(part).stream()) content += doc.decode(*s) + "\n";
      }
    }
    PageInterpreter interp(doc, page_no, info.height, ox, oy, layer.spans);
    interp.run(content, resources);
  }
  if (layer.spans.empty()) {
    throw Error(Errc::unsupported_document,
                "unsupported document: no text layer found (scanned or image-only PDF)");
  }
  return layer;
}

TextLayer read_text_layer(std::span<const std::uint8_t> bytes) {
  return read_text_layer(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace llmref::pdf
