#ifndef DNM_IO_HPP
#define DNM_IO_HPP

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "dnm/dualnet.hpp"
#include "dnm/error.hpp"
#include "dnm/scene.hpp"
#include "dnm/tensor.hpp"

namespace dnm {

namespace detail {

// Netpbm-style header tokenizer: whitespace separated, '#' comments to end of line.
class HeaderReader {
 public:
  HeaderReader(const std::string& data, std::string context) : data_(data), context_(std::move(context)) {}

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_])) && data_[pos_] != '#') ++pos_;
    if (start == pos_) throw FormatError(FormatError::Kind::truncated, context_ + ": header ends early");
    return data_.substr(start, pos_ - start);
  }

  std::size_t positive_int() {
    const std::string t = token();
    if (t.empty() || t.size() > 9 || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw FormatError(FormatError::Kind::malformed_header, context_ + ": expected a positive integer, got '" + t + "'");
    }
    const std::size_t v = std::stoul(t);
    if (v == 0) throw FormatError(FormatError::Kind::malformed_header, context_ + ": zero extent");
    return v;
  }

  double real() {
    const std::string t = token();
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) {
      throw FormatError(FormatError::Kind::malformed_header, context_ + ": expected a number, got '" + t + "'");
    }
    return v;
  }

  /// Consumes the single whitespace byte separating the header from the payload.
  std::size_t payload_offset() {
    if (pos_ >= data_.size()) throw FormatError(FormatError::Kind::truncated, context_ + ": missing payload");
    if (!std::isspace(static_cast<unsigned char>(data_[pos_]))) {
      throw FormatError(FormatError::Kind::malformed_header, context_ + ": header not terminated by whitespace");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      if (std::isspace(static_cast<unsigned char>(data_[pos_]))) {
        ++pos_;
      } else if (data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& data_;
  std::string context_;
  std::size_t pos_ = 0;
};

inline void check_payload(std::size_t have, std::size_t want, const std::string& context) {
  if (have < want) {
    throw FormatError(FormatError::Kind::truncated,
                      context + ": payload has " + std::to_string(have) + " bytes, header requires " + std::to_string(want));
  }
  if (have > want) {
    throw FormatError(FormatError::Kind::trailing_data,
                      context + ": " + std::to_string(have - want) + " bytes beyond the declared payload");
  }
}

}  // namespace detail

// --- PPM (P6, RGB) / PGM (P5, gray), maxval 255 ------------------------------

inline Tensor decode_pixmap(const std::string& bytes, const std::string& context = "image") {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError(FormatError::Kind::bad_magic, context + ": not a binary PGM/PPM (expected P5 or P6)");
  }
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  detail::HeaderReader hr(bytes, context);
  hr.token();
  const std::size_t w = hr.positive_int();
  const std::size_t h = hr.positive_int();
  const std::size_t maxval = hr.positive_int();
  if (maxval != 255) {
    throw FormatError(FormatError::Kind::unsupported_maxval, context + ": maxval " + std::to_string(maxval) + " (only 255 supported)");
  }
  const std::size_t off = hr.payload_offset();
  detail::check_payload(bytes.size() - off, w * h * channels, context);
  Tensor img = Tensor::image(1, channels, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const auto byte = static_cast<unsigned char>(bytes[off + (y * w + x) * channels + c]);
        img.at(0, c, y, x) = static_cast<double>(byte) / 255.0;
      }
    }
  }
  return img;
}

/// Quantisation used when saving: clamp to [0,1], then round half up.
inline unsigned char quantize_byte(double v) {
  const double q = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<unsigned char>(q);
}

inline std::string encode_pixmap(const Tensor& img) {
  require_rank4(img, "save_image");
  if (img.batch() != 1 || (img.channels() != 1 && img.channels() != 3)) {
    throw ShapeError("save_image: expected a [1,1|3,h,w] image, got " + to_string(img.shape()));
  }
  const std::size_t c = img.channels(), h = img.height(), w = img.width();
  std::string out = (c == 3 ? "P6\n" : "P5\n") + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + w * h * c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) out.push_back(static_cast<char>(quantize_byte(img.at(0, k, y, x))));
    }
  }
  return out;
}

inline Tensor load_image(const std::string& path) { return decode_pixmap(detail::read_file(path), path); }

inline void save_image(const Tensor& img, const std::string& path) { detail::write_file(path, encode_pixmap(img)); }

// --- PFM (grayscale "Pf", little-endian, rows bottom to top) ----------------

/// Single-channel float map, rows stored top to bottom in memory.
struct FloatMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> data;

  float at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
  bool operator==(const FloatMap&) const = default;
};

inline std::string encode_pfm(const FloatMap& m) {
  if (m.data.size() != m.width * m.height) throw ShapeError("save_pfm: data size does not match extents");
  std::string out = "Pf\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n-1.0\n";
  out.reserve(out.size() + 4 * m.data.size());
  for (std::size_t r = m.height; r-- > 0;) {
    for (std::size_t x = 0; x < m.width; ++x) detail::put_le<float>(out, m.data[r * m.width + x]);
  }
  return out;
}

inline FloatMap decode_pfm(const std::string& bytes, const std::string& context = "pfm") {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != 'f' && bytes[1] != 'F')) {
    throw FormatError(FormatError::Kind::bad_magic, context + ": not a PFM file");
  }
  if (bytes[1] == 'F') throw FormatError(FormatError::Kind::bad_magic, context + ": colour PFM (PF) is not supported");
  detail::HeaderReader hr(bytes, context);
  hr.token();
  FloatMap m;
  m.width = hr.positive_int();
  m.height = hr.positive_int();
  const double scale = hr.real();
  if (scale > 0.0) {
    throw FormatError(FormatError::Kind::unsupported_endianness, context + ": big-endian PFM (positive scale) is not supported");
  }
  if (scale == 0.0) throw FormatError(FormatError::Kind::malformed_header, context + ": zero scale");
  const std::size_t off = hr.payload_offset();
  detail::check_payload(bytes.size() - off, 4 * m.width * m.height, context);
  m.data.resize(m.width * m.height);
  std::size_t pos = off;
  for (std::size_t r = m.height; r-- > 0;) {
    for (std::size_t x = 0; x < m.width; ++x, pos += 4) {
      std::uint32_t bits = 0;
      for (std::size_t i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      m.data[r * m.width + x] = std::bit_cast<float>(bits);
    }
  }
  return m;
}

inline FloatMap load_pfm(const std::string& path) { return decode_pfm(detail::read_file(path), path); }

inline void save_pfm(const FloatMap& m, const std::string& path) { detail::write_file(path, encode_pfm(m)); }

/// [1,1,h,w] tensor to a float map (narrowed to 32-bit).
inline FloatMap to_float_map(const Tensor& t) {
  require_rank4(t, "to_float_map");
  if (t.batch() != 1 || t.channels() != 1) throw ShapeError("to_float_map: expected a [1,1,h,w] tensor");
  FloatMap m{t.width(), t.height(), std::vector<float>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i) m.data[i] = static_cast<float>(t[i]);
  return m;
}

inline Tensor to_tensor(const FloatMap& m) {
  Tensor t = Tensor::image(1, 1, m.height, m.width);
  for (std::size_t i = 0; i < m.data.size(); ++i) t[i] = static_cast<double>(m.data[i]);
  return t;
}

// --- scene directories --------------------------------------------------------
//
//   <stem>.left.ppm  <stem>.right.ppm  [<stem>.gt.disp.pfm  (pixels)]
//   rig.json (optional): {"focal_px": ..., "baseline_m": ...}

struct SceneFile {
  std::string stem;
  StereoSample sample;
};

inline std::string scene_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04zu", index);
  return buf;
}

inline void save_scene(const StereoSample& s, const std::filesystem::path& dir, const std::string& stem) {
  save_image(s.left, (dir / (stem + ".left.ppm")).string());
  save_image(s.right, (dir / (stem + ".right.ppm")).string());
  if (s.gt_disparity) {
    save_pfm(to_float_map(disparity_to_pixels(*s.gt_disparity)), (dir / (stem + ".gt.disp.pfm")).string());
  }
}

/// Loads every <stem>.left.ppm in `dir` (sorted by name) with its right view and,
/// when present, its ground truth (converted back to width fractions).
inline std::vector<SceneFile> load_scene_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw FormatError(FormatError::Kind::io, "not a directory: " + dir.string());
  const std::string suffix = ".left.ppm";
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      stems.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(stems.begin(), stems.end());
  std::vector<SceneFile> scenes;
  for (const auto& stem : stems) {
    SceneFile f{stem, {}};
    f.sample.left = load_image((dir / (stem + ".left.ppm")).string());
    const fs::path right = dir / (stem + ".right.ppm");
    if (!fs::exists(right)) throw FormatError(FormatError::Kind::io, "missing right view " + right.string());
    f.sample.right = load_image(right.string());
    require_same_shape(f.sample.left, f.sample.right, "load_scene_dir");
    const fs::path gt = dir / (stem + ".gt.disp.pfm");
    if (fs::exists(gt)) {
      Tensor px = to_tensor(load_pfm(gt.string()));
      if (px.height() != f.sample.left.height() || px.width() != f.sample.left.width()) {
        throw ShapeError("load_scene_dir: ground truth extents differ from image for " + stem);
      }
      f.sample.gt_disparity = disparity_to_fraction(px);
    }
    scenes.push_back(std::move(f));
  }
  return scenes;
}

}  // namespace dnm

#endif  // DNM_IO_HPP
