#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "dmfusion/io.hpp"

namespace dmfusion {

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t offset, const std::string& what) {
  throw FormatError(name + ": byte offset " + std::to_string(offset) + ": " + what);
}

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<Scalar> scalar_from(const std::string& s) {
  static const std::map<std::string, Scalar> table{
      {"char", Scalar::i8},    {"int8", Scalar::i8},     {"uchar", Scalar::u8},  {"uint8", Scalar::u8},
      {"short", Scalar::i16},  {"int16", Scalar::i16},   {"ushort", Scalar::u16}, {"uint16", Scalar::u16},
      {"int", Scalar::i32},    {"int32", Scalar::i32},   {"uint", Scalar::u32},  {"uint32", Scalar::u32},
      {"float", Scalar::f32},  {"float32", Scalar::f32}, {"double", Scalar::f64}, {"float64", Scalar::f64}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::size_t size_of(Scalar s) {
  switch (s) {
    case Scalar::i8:
    case Scalar::u8:
      return 1;
    case Scalar::i16:
    case Scalar::u16:
      return 2;
    case Scalar::i32:
    case Scalar::u32:
    case Scalar::f32:
      return 4;
    case Scalar::f64:
      return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::f32;
  bool is_list = false;
  Scalar count_type = Scalar::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

enum class Encoding { ascii, binary_le, binary_be };

// Sequential reader over the body of a PLY file.
class BodyReader {
 public:
  BodyReader(const std::string& b, std::size_t pos, Encoding enc, const std::string& name)
      : b_(b), pos_(pos), enc_(enc), name_(name) {}

  double read(Scalar t) {
    if (enc_ == Encoding::ascii) return read_ascii();
    const std::size_t n = size_of(t);
    if (pos_ + n > b_.size()) fail(name_, pos_, "unexpected end of data");
    unsigned char raw[8];
    std::memcpy(raw, b_.data() + pos_, n);
    if (enc_ == Encoding::binary_be) std::reverse(raw, raw + n);
    pos_ += n;
    switch (t) {
      case Scalar::i8: return static_cast<std::int8_t>(raw[0]);
      case Scalar::u8: return raw[0];
      case Scalar::i16: { std::int16_t v; std::memcpy(&v, raw, 2); return v; }
      case Scalar::u16: { std::uint16_t v; std::memcpy(&v, raw, 2); return v; }
      case Scalar::i32: { std::int32_t v; std::memcpy(&v, raw, 4); return v; }
      case Scalar::u32: { std::uint32_t v; std::memcpy(&v, raw, 4); return v; }
      case Scalar::f32: { float v; std::memcpy(&v, raw, 4); return v; }
      case Scalar::f64: { double v; std::memcpy(&v, raw, 8); return v; }
    }
    return 0;
  }

  void finish() {
    if (enc_ == Encoding::ascii) {
      while (pos_ < b_.size() && std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    }
    if (pos_ != b_.size()) fail(name_, pos_, "trailing data after the last element");
  }

 private:
  double read_ascii() {
    while (pos_ < b_.size() && std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < b_.size() && !std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_) fail(name_, start, "unexpected end of data");
    const std::string tok = b_.substr(start, pos_ - start);
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used == tok.size()) return v;
    } catch (const std::exception&) {
    }
    fail(name_, start, "malformed number '" + tok + "'");
  }

  const std::string& b_;
  std::size_t pos_;
  Encoding enc_;
  const std::string& name_;
};

std::string fmt9(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

template <typename T>
void put_le(std::string& out, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.append(raw, sizeof(T));
}

}  // namespace

void write_ply(std::ostream& out, const FusedCloud& cloud, bool binary) {
  bool color = false;
  for (const auto& p : cloud.points()) color = color || p.color.has_value();

  std::ostringstream hdr;
  hdr << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "comment fused point cloud\n"
      << "element vertex " << cloud.size() << '\n'
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n";
  if (color) hdr << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  hdr << "property uint merges\nproperty uint violations\nend_header\n";
  std::string body = hdr.str();

  for (const auto& p : cloud.points()) {
    const float f[6] = {static_cast<float>(p.position.x()), static_cast<float>(p.position.y()),
                        static_cast<float>(p.position.z()), static_cast<float>(p.normal.x()),
                        static_cast<float>(p.normal.y()),   static_cast<float>(p.normal.z())};
    const Rgb rgb = p.color.value_or(Rgb{0, 0, 0});
    if (binary) {
      for (float v : f) put_le(body, v);
      if (color)
        for (auto c : rgb) body.push_back(static_cast<char>(c));
      put_le(body, p.merges);
      put_le(body, p.violations);
    } else {
      for (int i = 0; i < 6; ++i) body += (i ? " " : "") + fmt9(f[i]);
      if (color)
        for (auto c : rgb) body += " " + std::to_string(c);
      body += " " + std::to_string(p.merges) + " " + std::to_string(p.violations) + "\n";
    }
  }
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

void write_ply(const fs::path& path, const FusedCloud& cloud, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_ply(out, cloud, binary);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

PlyCloud parse_ply(const std::string& b, const std::string& name) {
  const std::string end_marker = "end_header";
  if (b.compare(0, 4, "ply\n") != 0 && b.compare(0, 5, "ply\r\n") != 0) fail(name, 0, "bad magic: expected 'ply'");

  std::vector<Element> elements;
  std::optional<Encoding> enc;
  std::size_t pos = b.find('\n') + 1;
  std::size_t body = std::string::npos;
  while (pos < b.size()) {
    std::size_t eol = b.find('\n', pos);
    if (eol == std::string::npos) fail(name, pos, "header not terminated by end_header");
    std::string line = b.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string f, ver;
      ls >> f >> ver;
      if (f == "ascii") enc = Encoding::ascii;
      else if (f == "binary_little_endian") enc = Encoding::binary_le;
      else if (f == "binary_big_endian") enc = Encoding::binary_be;
      else fail(name, pos, "unknown format '" + f + "'");
    } else if (kw == "element") {
      Element e;
      long long n = -1;
      if (!(ls >> e.name >> n) || n < 0) fail(name, pos, "malformed element line");
      e.count = static_cast<std::size_t>(n);
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) fail(name, pos, "property before any element");
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, vt;
        ls >> ct >> vt >> p.name;
        auto c = scalar_from(ct), v = scalar_from(vt);
        if (!c || !v) fail(name, pos, "unknown list property types");
        p.is_list = true;
        p.count_type = *c;
        p.type = *v;
      } else {
        auto s = scalar_from(t);
        if (!s) fail(name, pos, "unknown property type '" + t + "'");
        p.type = *s;
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (kw == end_marker) {
      body = eol + 1;
      break;
    } else if (kw != "comment" && kw != "obj_info" && !kw.empty()) {
      fail(name, pos, "unexpected header keyword '" + kw + "'");
    }
    pos = eol + 1;
  }
  if (body == std::string::npos) fail(name, pos, "header not terminated by end_header");
  if (!enc) fail(name, 0, "missing format line");

  PlyCloud cloud;
  BodyReader r(b, body, *enc, name);
  for (const auto& e : elements) {
    const bool vertex = e.name == "vertex";
    std::map<std::string, int> slot;
    if (vertex) {
      for (std::size_t i = 0; i < e.props.size(); ++i) slot[e.props[i].name] = static_cast<int>(i);
      for (const char* req : {"x", "y", "z"})
        if (!slot.count(req)) fail(name, 0, std::string("vertex element lacks property ") + req);
      cloud.has_normals = slot.count("nx") && slot.count("ny") && slot.count("nz");
      cloud.has_color = slot.count("red") && slot.count("green") && slot.count("blue");
      cloud.has_counters = slot.count("merges") && slot.count("violations");
      cloud.vertices.reserve(e.count);
    }
    std::vector<double> values(e.props.size());
    for (std::size_t k = 0; k < e.count; ++k) {
      for (std::size_t i = 0; i < e.props.size(); ++i) {
        const Property& p = e.props[i];
        if (p.is_list) {
          const auto n = static_cast<long long>(r.read(p.count_type));
          for (long long j = 0; j < n; ++j) r.read(p.type);
          values[i] = 0;
        } else {
          values[i] = r.read(p.type);
        }
      }
      if (!vertex) continue;
      auto get = [&](const char* key) { return values[slot.at(key)]; };
      PlyVertex v;
      v.position = Eigen::Vector3f(static_cast<float>(get("x")), static_cast<float>(get("y")),
                                   static_cast<float>(get("z")));
      if (cloud.has_normals)
        v.normal = Eigen::Vector3f(static_cast<float>(get("nx")), static_cast<float>(get("ny")),
                                   static_cast<float>(get("nz")));
      if (cloud.has_color)
        v.color = {static_cast<std::uint8_t>(get("red")), static_cast<std::uint8_t>(get("green")),
                   static_cast<std::uint8_t>(get("blue"))};
      if (cloud.has_counters) {
        v.merges = static_cast<std::uint32_t>(get("merges"));
        v.violations = static_cast<std::uint32_t>(get("violations"));
      }
      cloud.vertices.push_back(v);
    }
  }
  r.finish();
  return cloud;
}

PlyCloud read_ply(const fs::path& path) { return parse_ply(read_file_bytes(path), path.string()); }

}  // namespace dmfusion
