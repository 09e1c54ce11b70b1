#include "depthpl/formats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "depthpl/error.hpp"

namespace depthpl {

namespace {

// Cursor over a header with exact-match helpers.
class HeaderParser {
 public:
  HeaderParser(const std::string& bytes, const char* format) : bytes_(bytes), format_(format) {}

  void expect(std::string_view literal, const char* what) {
    if (bytes_.compare(pos_, literal.size(), literal) != 0) fail(std::string("bad ") + what);
    pos_ += literal.size();
  }

  /// Decimal without sign or leading zeros, at most 9 digits.
  std::size_t number(const char* what) {
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') ++pos_;
    const std::size_t len = pos_ - start;
    if (len == 0 || len > 9 || (len > 1 && bytes_[start] == '0')) fail(std::string("bad ") + what);
    std::size_t v = 0;
    for (std::size_t i = start; i < pos_; ++i) v = v * 10 + static_cast<std::size_t>(bytes_[i] - '0');
    return v;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(std::string(format_) + ": " + msg);
  }

 private:
  const std::string& bytes_;
  const char* format_;
  std::size_t pos_ = 0;
};

void check_payload(const HeaderParser& p, std::size_t expected, const char* format) {
  if (p.remaining() != expected) {
    throw FormatError(std::string(format) + (p.remaining() < expected ? ": truncated payload" : ": trailing bytes") +
                      ", expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(p.remaining()));
  }
}

std::uint8_t quantize(Real v) {
  const Real c = std::clamp(v, Real(0), Real(1));
  return static_cast<std::uint8_t>(std::round(c * Real(255)));
}

}  // namespace

std::string encode_pfm(const DepthMap& depth) {
  std::string out = "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n";
  out.reserve(out.size() + depth.depth.size() * 4);
  for (std::size_t row = depth.height; row-- > 0;) {
    for (std::size_t x = 0; x < depth.width; ++x) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(depth.at(x, row)));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  }
  return out;
}

DepthMap decode_pfm(const std::string& bytes) {
  HeaderParser p(bytes, "pfm");
  if (bytes.compare(0, 3, "PF\n") == 0) p.fail("color PFM unsupported");
  p.expect("Pf\n", "magic");
  const std::size_t w = p.number("width");
  p.expect(" ", "header separator");
  const std::size_t h = p.number("height");
  p.expect("\n", "header line end");
  if (bytes.compare(p.pos(), 1, "-") != 0) {
    p.fail("big-endian (positive scale) PFM unsupported");
  }
  p.expect("-1.0\n", "scale (only -1.0 is supported)");
  if (w == 0 || h == 0) p.fail("zero extent");
  check_payload(p, w * h * 4, "pfm");
  DepthMap d(w, h);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + p.pos());
  for (std::size_t row = h; row-- > 0;) {
    for (std::size_t x = 0; x < w; ++x) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(data[b]) << (8 * b);
      data += 4;
      d.at(x, row) = static_cast<Real>(std::bit_cast<float>(bits));
    }
  }
  return d;
}

std::string encode_ppm(const Image& image) {
  if (image.channels != 3) {
    throw ShapeError("ppm: expected a 3-channel image, got " + std::to_string(image.channels));
  }
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.push_back(static_cast<char>(quantize(image.at(c, y, x))));
    }
  }
  return out;
}

namespace {

std::pair<std::size_t, std::size_t> pnm_header(HeaderParser& p, const std::string& bytes,
                                               const char* magic, const char* ascii_magic) {
  if (bytes.compare(0, 2, ascii_magic) == 0) p.fail("ASCII variant unsupported");
  p.expect(magic, "magic");
  const std::size_t w = p.number("width");
  p.expect(" ", "header separator");
  const std::size_t h = p.number("height");
  p.expect("\n", "header line end");
  const std::size_t maxval_pos = p.pos();
  p.number("maxval");
  if (bytes.compare(maxval_pos, 4, "255\n") != 0) p.fail("maxval must be 255");
  p.expect("\n", "maxval line end");
  if (w == 0 || h == 0) p.fail("zero extent");
  return {w, h};
}

}  // namespace

Image decode_ppm(const std::string& bytes) {
  HeaderParser p(bytes, "ppm");
  const auto [w, h] = pnm_header(p, bytes, "P6\n", "P3");
  check_payload(p, w * h * 3, "ppm");
  Image im(3, h, w);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + p.pos());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) im.at(c, y, x) = static_cast<Real>(*data++) / Real(255);
    }
  }
  return im;
}

std::string encode_pgm_mask(const PixelMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  for (std::uint8_t b : mask.bits) out.push_back(static_cast<char>(b ? 255 : 0));
  return out;
}

PixelMask decode_pgm_mask(const std::string& bytes) {
  HeaderParser p(bytes, "pgm");
  const auto [w, h] = pnm_header(p, bytes, "P5\n", "P2");
  check_payload(p, w * h, "pgm");
  PixelMask m(w, h);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + p.pos());
  for (std::size_t i = 0; i < w * h; ++i) {
    if (data[i] != 0 && data[i] != 255) {
      throw FormatError("pgm: mask byte " + std::to_string(data[i]) + " at offset " +
                        std::to_string(i) + " is neither 0 nor 255");
    }
    m.bits[i] = data[i] ? 1 : 0;
  }
  return m;
}

std::string encode_ply(const PointCloud& cloud) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char line[96];
  for (const Point3& p : cloud.points) {
    for (Real v : p) {
      if (!std::isfinite(v)) throw DataError("ply: cannot write a non-finite coordinate");
    }
    const int n = std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", static_cast<double>(p[0]),
                                static_cast<double>(p[1]), static_cast<double>(p[2]));
    out.append(line, static_cast<std::size_t>(n));
  }
  return out;
}

PointCloud decode_ply(const std::string& bytes) {
  HeaderParser p(bytes, "ply");
  p.expect("ply\n", "magic");
  p.expect("format ascii 1.0\n", "format line");
  p.expect("element vertex ", "element line");
  const std::size_t n = p.number("vertex count");
  p.expect("\nproperty float x\nproperty float y\nproperty float z\nend_header\n", "property block");

  PointCloud cloud;
  cloud.points.reserve(std::min<std::size_t>(n, bytes.size() / 6 + 1));
  const char* cur = bytes.data() + p.pos();
  const char* end = bytes.data() + bytes.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (cur == end) {
      throw FormatError("ply: vertex count mismatch, header says " + std::to_string(n) + ", found " +
                        std::to_string(i));
    }
    Point3 pt;
    for (int k = 0; k < 3; ++k) {
      double v = 0;
      const auto res = std::from_chars(cur, end, v);
      if (res.ec != std::errc() || !std::isfinite(v)) {
        throw FormatError("ply: bad coordinate on vertex " + std::to_string(i));
      }
      pt[static_cast<std::size_t>(k)] = static_cast<Real>(v);
      cur = res.ptr;
      const char sep = k < 2 ? ' ' : '\n';
      if (cur == end || *cur != sep) throw FormatError("ply: bad separator on vertex " + std::to_string(i));
      ++cur;
    }
    cloud.points.push_back(pt);
  }
  if (cur != end) {
    throw FormatError("ply: vertex count mismatch, data continues after " + std::to_string(n) +
                      " vertices");
  }
  return cloud;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed for " + path);
}

namespace {

template <class Decode>
auto decode_file(const std::string& path, Decode decode) {
  const std::string bytes = read_file(path);
  try {
    return decode(bytes);
  } catch (const FormatError& e) {
    throw FormatError(std::string(e.what()) + " (" + path + ")");
  }
}

}  // namespace

void write_pfm(const std::string& path, const DepthMap& depth) { write_file(path, encode_pfm(depth)); }
DepthMap read_pfm(const std::string& path) { return decode_file(path, decode_pfm); }
void write_ppm(const std::string& path, const Image& image) { write_file(path, encode_ppm(image)); }
Image read_ppm(const std::string& path) { return decode_file(path, decode_ppm); }
void write_pgm_mask(const std::string& path, const PixelMask& mask) {
  write_file(path, encode_pgm_mask(mask));
}
PixelMask read_pgm_mask(const std::string& path) { return decode_file(path, decode_pgm_mask); }
void write_ply(const std::string& path, const PointCloud& cloud) { write_file(path, encode_ply(cloud)); }
PointCloud read_ply(const std::string& path) { return decode_file(path, decode_ply); }

}  // namespace depthpl
