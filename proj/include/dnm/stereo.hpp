#ifndef DNM_STEREO_HPP
#define DNM_STEREO_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dnm/autodiff.hpp"
#include "dnm/layers.hpp"

namespace dnm {

/// Sampling direction along a row. Disparities are fractions of the image width.
///   leftward:  out(x) = src(x - d(x) * w)   (reconstructs the left view from the right)
///   rightward: out(x) = src(x + d(x) * w)   (reconstructs the right view from the left)
enum class WarpDirection { leftward, rightward };

inline WarpDirection opposite(WarpDirection d) {
  return d == WarpDirection::leftward ? WarpDirection::rightward : WarpDirection::leftward;
}

namespace detail {

struct RowSample {
  std::size_t x0;
  double frac;
  bool clamped;
};

// Linear interpolation cell for source coordinate xs in a row of width w >= 2.
inline RowSample row_sample(double xs, std::size_t w) {
  const double last = static_cast<double>(w - 1);
  bool clamped = false;
  if (!(xs >= 0.0)) {  // also catches NaN
    xs = 0.0;
    clamped = true;
  } else if (xs > last) {
    xs = last;
    clamped = true;
  }
  auto x0 = static_cast<std::size_t>(std::floor(xs));
  if (x0 >= w - 1) x0 = w - 2;
  return {x0, xs - static_cast<double>(x0), clamped};
}

}  // namespace detail

/// Differentiable horizontal bilinear warp of `source` [b,c,h,w] by `disp` [b,1,h,w].
/// Sample coordinates are clamped to [0, w-1]; clamped samples carry no gradient to disp.
inline Var warp_horizontal(Var source, Var disp, WarpDirection direction) {
  Tape& t = detail::common_tape(source, disp, "warp_horizontal");
  const Tensor& src = source.value();
  const Tensor& d = disp.value();
  require_rank4(src, "warp_horizontal");
  require_rank4(d, "warp_horizontal disparity");
  if (d.channels() != 1 || d.batch() != src.batch() || d.height() != src.height() || d.width() != src.width()) {
    throw ShapeError("warp_horizontal: disparity " + to_string(d.shape()) + " incompatible with source " +
                     to_string(src.shape()));
  }
  const std::size_t B = src.batch(), C = src.channels(), H = src.height(), W = src.width();
  const double sign = direction == WarpDirection::leftward ? -1.0 : 1.0;
  const double scale = sign * static_cast<double>(W);

  Tensor out(src.shape());
  if (W == 1) {
    out = src;
  } else {
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t y = 0; y < H; ++y) {
        const double* drow = d.values().data() + d.index(b, 0, y, 0);
        for (std::size_t x = 0; x < W; ++x) {
          const auto s = detail::row_sample(static_cast<double>(x) + scale * drow[x], W);
          for (std::size_t c = 0; c < C; ++c) {
            const double* srow = src.values().data() + src.index(b, c, y, 0);
            out.at(b, c, y, x) = (1.0 - s.frac) * srow[s.x0] + s.frac * srow[s.x0 + 1];
          }
        }
      }
    }
  }

  return t.record("warp_horizontal", {source, disp}, std::move(out),
                  [is = source.id, id = disp.id, B, C, H, W, scale](Tape& tp, std::size_t self) {
                    if (W == 1) {
                      if (Tensor* gs = tp.grad_sink(is)) {
                        const Tensor& g = tp.grad_of(self);
                        for (std::size_t i = 0; i < g.size(); ++i) (*gs)[i] += g[i];
                      }
                      return;
                    }
                    const Tensor& g = tp.grad_of(self);
                    const Tensor& src = tp.value(is);
                    const Tensor& d = tp.value(id);
                    Tensor* gs = tp.grad_sink(is);
                    Tensor* gd = tp.grad_sink(id);
                    for (std::size_t b = 0; b < B; ++b) {
                      for (std::size_t y = 0; y < H; ++y) {
                        const double* drow = d.values().data() + d.index(b, 0, y, 0);
                        for (std::size_t x = 0; x < W; ++x) {
                          const auto s = detail::row_sample(static_cast<double>(x) + scale * drow[x], W);
                          double dsum = 0.0;
                          for (std::size_t c = 0; c < C; ++c) {
                            const std::size_t row = src.index(b, c, y, 0);
                            const double gv = g[row + x];
                            if (gs) {
                              (*gs)[row + s.x0] += gv * (1.0 - s.frac);
                              (*gs)[row + s.x0 + 1] += gv * s.frac;
                            }
                            dsum += gv * (src[row + s.x0 + 1] - src[row + s.x0]);
                          }
                          if (gd && !s.clamped) (*gd)[d.index(b, 0, y, x)] += dsum * scale;
                        }
                      }
                    }
                  });
}

inline Tensor warp_horizontal(const Tensor& source, const Tensor& disp, WarpDirection direction) {
  Tape tape;
  return warp_horizontal(tape.constant(source), tape.constant(disp), direction).value();
}

/// 3x3 mean with edge-replicated borders; output has the input's extents.
inline Var box3(Var input) {
  const Tensor& in = input.value();
  require_rank4(in, "box3");
  const std::size_t H = in.height(), W = in.width(), planes = in.batch() * in.channels();
  Tensor out(in.shape());
  const auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = in.values().data() + p * H * W;
    double* dst = out.values().data() + p * H * W;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double s = 0.0;
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
          const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, H);
          for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
            s += src[yy * W + clampi(static_cast<std::ptrdiff_t>(x) + dx, W)];
          }
        }
        dst[y * W + x] = s / 9.0;
      }
    }
  }
  return input.tape->record("box3", {input}, std::move(out), [ii = input.id, H, W, planes, clampi](Tape& tp, std::size_t self) {
    Tensor* gi = tp.grad_sink(ii);
    if (!gi) return;
    const Tensor& g = tp.grad_of(self);
    for (std::size_t p = 0; p < planes; ++p) {
      const double* gp = g.values().data() + p * H * W;
      double* dst = gi->values().data() + p * H * W;
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          const double v = gp[y * W + x] / 9.0;
          for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
            const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, H);
            for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
              dst[yy * W + clampi(static_cast<std::ptrdiff_t>(x) + dx, W)] += v;
            }
          }
        }
      }
    }
  });
}

struct SsimConstants {
  double c1 = 1e-4;  // (0.01 * L)^2 with L = 1
  double c2 = 9e-4;  // (0.03 * L)^2
};

/// Per-pixel, per-channel SSIM over 3x3 edge-replicated windows.
/// Written symmetrically in (a, b) so ssim_map(a, b) == ssim_map(b, a) bit for bit.
inline Var ssim_map(Var a, Var b, SsimConstants k = {}) {
  require_same_shape(a.value(), b.value(), "ssim_map");
  require_rank4(a.value(), "ssim_map");
  const Var mu_a = box3(a);
  const Var mu_b = box3(b);
  const Var mu_aa = mu_a * mu_a;
  const Var mu_bb = mu_b * mu_b;
  const Var mu_ab = mu_a * mu_b;
  const Var var_a = box3(a * a) - mu_aa;
  const Var var_b = box3(b * b) - mu_bb;
  const Var cov = box3(a * b) - mu_ab;
  const Var num = add_scalar(2.0 * mu_ab, k.c1) * add_scalar(2.0 * cov, k.c2);
  const Var den = add_scalar(mu_aa + mu_bb, k.c1) * add_scalar(var_a + var_b, k.c2);
  return num / den;
}

/// Forward difference along x: out(y, x) = in(y, x+1) - in(y, x); last column is zero.
inline Var diff_x(Var input) {
  const Tensor& in = input.value();
  require_rank4(in, "diff_x");
  if (in.width() < 2 || in.height() < 2) throw ShapeError("image_gradients: extents must be at least 2x2, got " + to_string(in.shape()));
  const std::size_t W = in.width(), rows = in.size() / W;
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 0; x + 1 < W; ++x) out[r * W + x] = in[r * W + x + 1] - in[r * W + x];
  }
  return input.tape->record("diff_x", {input}, std::move(out), [ii = input.id, W, rows](Tape& tp, std::size_t self) {
    Tensor* gi = tp.grad_sink(ii);
    if (!gi) return;
    const Tensor& g = tp.grad_of(self);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t x = 0; x + 1 < W; ++x) {
        (*gi)[r * W + x + 1] += g[r * W + x];
        (*gi)[r * W + x] -= g[r * W + x];
      }
    }
  });
}

/// Forward difference along y; last row is zero.
inline Var diff_y(Var input) {
  const Tensor& in = input.value();
  require_rank4(in, "diff_y");
  if (in.width() < 2 || in.height() < 2) throw ShapeError("image_gradients: extents must be at least 2x2, got " + to_string(in.shape()));
  const std::size_t H = in.height(), W = in.width(), planes = in.batch() * in.channels();
  Tensor out(in.shape());
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t base = p * H * W;
    for (std::size_t y = 0; y + 1 < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) out[base + y * W + x] = in[base + (y + 1) * W + x] - in[base + y * W + x];
    }
  }
  return input.tape->record("diff_y", {input}, std::move(out), [ii = input.id, H, W, planes](Tape& tp, std::size_t self) {
    Tensor* gi = tp.grad_sink(ii);
    if (!gi) return;
    const Tensor& g = tp.grad_of(self);
    for (std::size_t p = 0; p < planes; ++p) {
      const std::size_t base = p * H * W;
      for (std::size_t y = 0; y + 1 < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          (*gi)[base + (y + 1) * W + x] += g[base + y * W + x];
          (*gi)[base + y * W + x] -= g[base + y * W + x];
        }
      }
    }
  });
}

struct ImageGradients {
  Var gx;
  Var gy;
};

inline ImageGradients image_gradients(Var x) { return {diff_x(x), diff_y(x)}; }

/// Level 0 is `image`; each further level is the 2x2 mean of the previous one.
inline std::vector<Tensor> build_pyramid(const Tensor& image, std::size_t levels = 4) {
  require_rank4(image, "build_pyramid");
  if (levels == 0) throw ConfigError("build_pyramid: levels must be >= 1");
  const std::size_t factor = std::size_t{1} << (levels - 1);
  if (image.height() % factor != 0 || image.width() % factor != 0) {
    throw ShapeError("build_pyramid: extents " + to_string(image.shape()) + " are not divisible by " +
                     std::to_string(factor) + "; crop the input to a multiple of " + std::to_string(factor));
  }
  std::vector<Tensor> pyramid;
  pyramid.reserve(levels);
  pyramid.push_back(image);
  for (std::size_t k = 1; k < levels; ++k) pyramid.push_back(avg_pool2(pyramid.back()));
  return pyramid;
}

}  // namespace dnm

#endif  // DNM_STEREO_HPP
