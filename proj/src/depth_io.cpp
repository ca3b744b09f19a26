#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "dmfusion/io.hpp"

namespace dmfusion {

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t offset, const std::string& what) {
  throw FormatError(name + ": byte offset " + std::to_string(offset) + ": " + what);
}

// Netpbm header reader: magic, then whitespace-separated integers with '#'
// comments, then exactly one whitespace byte before the raster.
class NetpbmHeader {
 public:
  NetpbmHeader(const std::string& bytes, const std::string& name) : b_(bytes), name_(name) {}

  long next_int() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000'000) fail(name_, start, "header value too large");
      ++pos_;
    }
    if (pos_ == start) fail(name_, start, "expected an integer in the header");
    return v;
  }

  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_])))
      fail(name_, pos_, "expected whitespace before the raster");
    return pos_ + 1;
  }

  std::size_t pos_ = 2;

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& b_;
  const std::string& name_;
};

DepthImage parse_pgm(const std::string& b, const std::string& name) {
  NetpbmHeader h(b, name);
  const long w = h.next_int(), ht = h.next_int(), maxval = h.next_int();
  if (w <= 0 || ht <= 0) fail(name, h.pos_, "image dimensions must be positive");
  if (maxval <= 0 || maxval > 65535) fail(name, h.pos_, "maxval must be in [1, 65535]");
  const std::size_t start = h.raster_start();
  const std::size_t bps = maxval < 256 ? 1 : 2;
  const std::size_t need = static_cast<std::size_t>(w) * ht * bps;
  if (b.size() - start < need)
    fail(name, b.size(), "raster truncated: expected " + std::to_string(need) + " bytes");
  if (b.size() - start > need) fail(name, start + need, "trailing data after raster");

  DepthImage d(ht, w);
  const auto* p = reinterpret_cast<const unsigned char*>(b.data() + start);
  for (long i = 0; i < w * ht; ++i) {
    const unsigned mm = bps == 1 ? p[i] : (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1];
    if (mm > static_cast<unsigned>(maxval)) fail(name, start + i * bps, "sample exceeds maxval");
    d.data()[i] = mm == 0 ? std::numeric_limits<double>::quiet_NaN() : mm / 1000.0;
  }
  return d;
}

DepthImage parse_dpf(const std::string& b, const std::string& name) {
  if (b.size() < 8) fail(name, b.size(), "truncated DPF1 header");
  const auto* p = reinterpret_cast<const unsigned char*>(b.data());
  const unsigned w = p[4] | (p[5] << 8), h = p[6] | (p[7] << 8);
  if (w == 0 || h == 0) fail(name, 4, "image dimensions must be positive");
  const std::size_t need = static_cast<std::size_t>(w) * h * 4;
  if (b.size() - 8 != need) {
    fail(name, 8, "expected " + std::to_string(need) + " bytes of samples (" + std::to_string(w) + "x" +
                      std::to_string(h) + " float32), found " + std::to_string(b.size() - 8));
  }
  DepthImage d(h, w);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    const unsigned char* q = p + 8 + 4 * i;
    const std::uint32_t bits = q[0] | (q[1] << 8) | (q[2] << 16) | (static_cast<std::uint32_t>(q[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    d.data()[i] = (std::isfinite(f) && f > 0) ? static_cast<double>(f) : std::numeric_limits<double>::quiet_NaN();
  }
  return d;
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

DepthImage parse_depth(const std::string& bytes, const std::string& name) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return parse_pgm(bytes, name);
  if (bytes.size() >= 4 && bytes.compare(0, 4, "DPF1") == 0) return parse_dpf(bytes, name);
  fail(name, 0, "bad magic: expected 'P5' (PGM) or 'DPF1'");
}

DepthImage read_depth_file(const fs::path& path) { return parse_depth(read_file_bytes(path), path.string()); }

void write_depth_pgm(const fs::path& path, const DepthImage& depths) {
  std::string out = "P5\n" + std::to_string(depths.cols()) + " " + std::to_string(depths.rows()) + "\n65535\n";
  for (Eigen::Index i = 0; i < depths.size(); ++i) {
    const double z = depths.data()[i];
    long mm = is_valid_depth(z) ? std::lround(z * 1000.0) : 0;
    if (mm > 65535) throw InputError("depth " + std::to_string(z) + " m does not fit a 16-bit millimeter PGM");
    out.push_back(static_cast<char>((mm >> 8) & 0xff));
    out.push_back(static_cast<char>(mm & 0xff));
  }
  write_bytes(path, out);
}

void write_depth_dpf(const fs::path& path, const DepthImage& depths) {
  if (depths.cols() > 65535 || depths.rows() > 65535) throw InputError("DPF1 dimensions exceed 65535");
  std::string out = "DPF1";
  const auto w = static_cast<std::uint16_t>(depths.cols()), h = static_cast<std::uint16_t>(depths.rows());
  for (std::uint16_t v : {w, h}) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  }
  for (Eigen::Index i = 0; i < depths.size(); ++i) {
    const double z = depths.data()[i];
    const float f = is_valid_depth(z) ? static_cast<float>(z) : std::numeric_limits<float>::quiet_NaN();
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
  }
  write_bytes(path, out);
}

std::vector<Rgb> read_color_ppm(const fs::path& path, int expected_width, int expected_height) {
  const std::string b = read_file_bytes(path);
  const std::string name = path.string();
  if (b.size() < 2 || b[0] != 'P' || b[1] != '6') fail(name, 0, "bad magic: expected 'P6'");
  NetpbmHeader h(b, name);
  const long w = h.next_int(), ht = h.next_int(), maxval = h.next_int();
  if (w != expected_width || ht != expected_height)
    fail(name, 2, "color image size does not match the depth map");
  if (maxval != 255) fail(name, h.pos_, "only 8-bit PPM (maxval 255) is supported");
  const std::size_t start = h.raster_start();
  const std::size_t need = static_cast<std::size_t>(w) * ht * 3;
  if (b.size() - start < need) fail(name, b.size(), "raster truncated");
  if (b.size() - start > need) fail(name, start + need, "trailing data after raster");
  std::vector<Rgb> px(static_cast<std::size_t>(w) * ht);
  for (std::size_t i = 0; i < px.size(); ++i)
    for (int c = 0; c < 3; ++c) px[i][c] = static_cast<std::uint8_t>(b[start + 3 * i + c]);
  return px;
}

}  // namespace dmfusion
