#ifndef DNM_SCENE_HPP
#define DNM_SCENE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "dnm/rng.hpp"
#include "dnm/stereo.hpp"

namespace dnm {

/// Pinhole stereo rig: focal length in pixels, baseline in metres.
struct CameraRig {
  double focal_px = 100.0;
  double baseline_m = 0.54;

  void validate() const {
    if (!(focal_px > 0.0) || !(baseline_m > 0.0)) throw ConfigError("CameraRig: focal length and baseline must be positive");
  }
};

/// A rectified pair. `gt_disparity` is [1,1,h,w] in width fractions.
struct StereoSample {
  Tensor left;
  Tensor right;
  std::optional<Tensor> gt_disparity;
  std::optional<CameraRig> rig;
};

/// Width-fraction disparity to pixels.
inline Tensor disparity_to_pixels(const Tensor& frac) {
  require_rank4(frac, "disparity_to_pixels");
  Tensor px = frac;
  const double w = static_cast<double>(frac.width());
  for (double& v : px.values()) v *= w;
  return px;
}

/// Pixel disparity to width fractions.
inline Tensor disparity_to_fraction(const Tensor& px) {
  require_rank4(px, "disparity_to_fraction");
  Tensor frac = px;
  const double w = static_cast<double>(px.width());
  for (double& v : frac.values()) v /= w;
  return frac;
}

enum class DisparityProfile { constant, two_plane, slanted };
enum class TextureKind { random_noise, smoothed_noise, checkers };

inline DisparityProfile parse_profile(std::string_view s) {
  if (s == "constant") return DisparityProfile::constant;
  if (s == "two-plane") return DisparityProfile::two_plane;
  if (s == "slanted") return DisparityProfile::slanted;
  throw ConfigError("unknown disparity profile '" + std::string(s) + "'");
}

inline TextureKind parse_texture(std::string_view s) {
  if (s == "random-noise") return TextureKind::random_noise;
  if (s == "smoothed-noise") return TextureKind::smoothed_noise;
  if (s == "checkers") return TextureKind::checkers;
  throw ConfigError("unknown texture kind '" + std::string(s) + "'");
}

/// Synthetic scene description. Disparities are in pixels and vary only with
/// the row (top plane / bottom plane, or a vertical ramp), so the left- and
/// right-view disparity maps coincide.
struct SceneSpec {
  DisparityProfile profile = DisparityProfile::constant;
  double disparity_px = 4.0;         // constant value, top plane, or top-row value
  double disparity_bottom_px = 8.0;  // bottom plane / bottom-row value
  TextureKind texture = TextureKind::smoothed_noise;
  std::size_t height = 64;
  std::size_t width = 128;
  std::size_t channels = 3;
  double d_max_frac = 0.3;
  std::uint64_t seed = 0;
};

namespace detail {

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise on a lattice with the given cell size, smoothly interpolated.
inline void add_value_noise(Tensor& img, std::size_t c, double cell, double amplitude, Rng& rng) {
  const std::size_t H = img.height(), W = img.width();
  const auto gh = static_cast<std::size_t>(std::ceil(static_cast<double>(H) / cell)) + 2;
  const auto gw = static_cast<std::size_t>(std::ceil(static_cast<double>(W) / cell)) + 2;
  std::vector<double> lattice(gh * gw);
  for (double& v : lattice) v = rng.uniform();
  for (std::size_t y = 0; y < H; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const auto y0 = static_cast<std::size_t>(fy);
    const double ty = smoothstep(fy - static_cast<double>(y0));
    for (std::size_t x = 0; x < W; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const auto x0 = static_cast<std::size_t>(fx);
      const double tx = smoothstep(fx - static_cast<double>(x0));
      const double a = lattice[y0 * gw + x0], b = lattice[y0 * gw + x0 + 1];
      const double cc = lattice[(y0 + 1) * gw + x0], d = lattice[(y0 + 1) * gw + x0 + 1];
      const double top = a + (b - a) * tx, bottom = cc + (d - cc) * tx;
      img.at(0, c, y, x) += amplitude * (top + (bottom - top) * ty);
    }
  }
}

inline Tensor make_texture(const SceneSpec& spec, Rng& rng) {
  Tensor img = Tensor::image(1, spec.channels, spec.height, spec.width);
  switch (spec.texture) {
    case TextureKind::random_noise:
      for (double& v : img.values()) v = rng.uniform();
      break;
    case TextureKind::checkers: {
      const std::size_t cell = 8;
      for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t y = 0; y < spec.height; ++y) {
          for (std::size_t x = 0; x < spec.width; ++x) {
            img.at(0, c, y, x) = ((y / cell + x / cell) % 2 == 0) ? 0.2 : 0.8;
          }
        }
      }
      break;
    }
    case TextureKind::smoothed_noise: {
      // Octaves from coarse to fine; normalised per channel to [0.05, 0.95].
      const std::array<double, 4> cells{16.0, 8.0, 4.0, 2.0};
      const std::array<double, 4> amps{1.0, 0.6, 0.35, 0.2};
      for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t o = 0; o < cells.size(); ++o) add_value_noise(img, c, cells[o], amps[o], rng);
        const std::size_t plane = spec.height * spec.width;
        double* p = img.values().data() + c * plane;
        const auto [lo, hi] = std::minmax_element(p, p + plane);
        const double mn = *lo, mx = *hi;
        const double span = mx > mn ? mx - mn : 1.0;
        for (std::size_t i = 0; i < plane; ++i) p[i] = 0.05 + 0.9 * (p[i] - mn) / span;
      }
      break;
    }
  }
  return img;
}

}  // namespace detail

/// Per-pixel ground-truth disparity in pixels, [1,1,h,w].
inline Tensor scene_disparity_px(const SceneSpec& spec) {
  Tensor d = Tensor::image(1, 1, spec.height, spec.width);
  for (std::size_t y = 0; y < spec.height; ++y) {
    double v = spec.disparity_px;
    if (spec.profile == DisparityProfile::two_plane) {
      v = y < spec.height / 2 ? spec.disparity_px : spec.disparity_bottom_px;
    } else if (spec.profile == DisparityProfile::slanted) {
      const double t = spec.height > 1 ? static_cast<double>(y) / static_cast<double>(spec.height - 1) : 0.0;
      v = spec.disparity_px + t * (spec.disparity_bottom_px - spec.disparity_px);
    }
    for (std::size_t x = 0; x < spec.width; ++x) d.at(0, 0, y, x) = v;
  }
  return d;
}

/// Textured left view; right(x) = left sampled at x + d(x) * w with clamped borders.
inline StereoSample generate_scene(const SceneSpec& spec) {
  if (spec.height < 2 || spec.width < 2 || (spec.channels != 1 && spec.channels != 3)) {
    throw ConfigError("generate_scene: need extents >= 2x2 and 1 or 3 channels");
  }
  const Tensor disp_px = scene_disparity_px(spec);
  const double bound = spec.d_max_frac * static_cast<double>(spec.width);
  for (double v : disp_px.values()) {
    if (!(v >= 0.0) || !(v < bound)) {
      throw ConfigError("generate_scene: disparity " + std::to_string(v) + " px outside [0, " + std::to_string(bound) + ")");
    }
  }
  Rng rng(spec.seed);
  StereoSample s;
  s.left = detail::make_texture(spec, rng);
  Tensor frac = disp_px;
  for (double& v : frac.values()) v /= static_cast<double>(spec.width);
  s.right = warp_horizontal(s.left, frac, WarpDirection::rightward);
  s.gt_disparity = std::move(frac);
  return s;
}

struct AugmentOptions {
  bool photometric = true;
  bool flip = true;
};

/// One draw of augmentation parameters. The default is the identity.
struct AugmentDraws {
  double gamma = 1.0;
  double brightness = 1.0;
  std::array<double, 3> color{1.0, 1.0, 1.0};
  bool flip = false;
};

inline AugmentDraws draw_augmentation(Rng& rng, const AugmentOptions& opt) {
  AugmentDraws d;
  // Always consume the same number of draws so the stream does not depend on the flags.
  const double gamma = rng.uniform(0.8, 1.2);
  const double brightness = rng.uniform(0.8, 1.2);
  std::array<double, 3> color{};
  for (double& c : color) c = rng.uniform(0.95, 1.05);
  const bool flip = rng.bernoulli(0.5);
  if (opt.photometric) {
    d.gamma = gamma;
    d.brightness = brightness;
    d.color = color;
  }
  if (opt.flip) d.flip = flip;
  return d;
}

/// Applies the same photometric change to both views; a flip mirrors both
/// images and swaps their roles so the pair stays a valid rectified pair.
inline StereoSample augment(const StereoSample& sample, const AugmentDraws& d) {
  StereoSample out = sample;
  const bool identity_photometric = d.gamma == 1.0 && d.brightness == 1.0 && d.color == std::array<double, 3>{1.0, 1.0, 1.0};
  if (!identity_photometric) {
    for (Tensor* img : {&out.left, &out.right}) {
      const std::size_t C = img->channels(), plane = img->height() * img->width();
      for (std::size_t b = 0; b < img->batch(); ++b) {
        for (std::size_t c = 0; c < C; ++c) {
          double* p = img->values().data() + (b * C + c) * plane;
          const double k = d.brightness * d.color[c % 3];
          for (std::size_t i = 0; i < plane; ++i) p[i] = std::clamp(std::pow(p[i], d.gamma) * k, 0.0, 1.0);
        }
      }
    }
  }
  if (d.flip) {
    Tensor new_left = flip_horizontal(out.right);
    Tensor new_right = flip_horizontal(out.left);
    out.left = std::move(new_left);
    out.right = std::move(new_right);
    if (out.gt_disparity) out.gt_disparity = flip_horizontal(*out.gt_disparity);
  }
  return out;
}

inline StereoSample augment(const StereoSample& sample, Rng& rng, const AugmentOptions& opt = {}) {
  return augment(sample, draw_augmentation(rng, opt));
}

}  // namespace dnm

#endif  // DNM_SCENE_HPP
