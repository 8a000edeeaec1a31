#ifndef DNM_LAYERS_HPP
#define DNM_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dnm/autodiff.hpp"

namespace dnm {

namespace detail {

// Output columns ox whose input column ox*stride + k - pad lies in [0, in_w).
struct ColumnRange {
  std::size_t begin;
  std::size_t end;
};

inline ColumnRange valid_outputs(std::size_t in_w, std::size_t out_w, std::size_t stride, std::size_t k,
                                 std::size_t pad) {
  // ox*stride + k >= pad  and  ox*stride + k - pad <= in_w - 1
  std::size_t begin = 0;
  if (pad > k) begin = (pad - k + stride - 1) / stride;
  std::size_t end = 0;
  if (in_w - 1 + pad >= k) end = std::min(out_w, (in_w - 1 + pad - k) / stride + 1);
  if (begin > end) begin = end;
  return {begin, end};
}

}  // namespace detail

/// Cross-correlation of input[b,c,h,w] with kernel[o,c,kh,kw] and zero padding.
/// Output extents must come out exact: (h + 2*padding - kh) % stride == 0.
inline Var conv2d(Var input, Var kernel, std::size_t stride, std::size_t padding) {
  Tape& t = detail::common_tape(input, kernel, "conv2d");
  const Tensor& in = input.value();
  const Tensor& k = kernel.value();
  require_rank4(in, "conv2d");
  require_rank4(k, "conv2d kernel");
  if (stride == 0) throw ConfigError("conv2d: stride must be >= 1");
  if (k.dim(1) != in.channels()) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(k.dim(1)) + " input channels, input has " +
                     std::to_string(in.channels()));
  }
  const std::size_t B = in.batch(), C = in.channels(), H = in.height(), W = in.width();
  const std::size_t O = k.dim(0), KH = k.dim(2), KW = k.dim(3);
  const std::size_t ph = H + 2 * padding, pw = W + 2 * padding;
  if (KH > ph || KW > pw) throw ShapeError("conv2d: kernel larger than padded input");
  if ((ph - KH) % stride != 0 || (pw - KW) % stride != 0) {
    throw ShapeError("conv2d: output extent is not integral for input " + to_string(in.shape()) + ", kernel " +
                     to_string(k.shape()) + ", stride " + std::to_string(stride) + ", padding " +
                     std::to_string(padding));
  }
  const std::size_t OH = (ph - KH) / stride + 1, OW = (pw - KW) / stride + 1;

  Tensor out(Shape{B, O, OH, OW});
  const double* ip = in.values().data();
  const double* kp = k.values().data();
  double* op = out.values().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < O; ++o) {
      double* oplane = op + (b * O + o) * OH * OW;
      for (std::size_t c = 0; c < C; ++c) {
        const double* iplane = ip + (b * C + c) * H * W;
        for (std::size_t ky = 0; ky < KH; ++ky) {
          for (std::size_t kx = 0; kx < KW; ++kx) {
            const double kv = kp[((o * C + c) * KH + ky) * KW + kx];
            const auto cols = detail::valid_outputs(W, OW, stride, kx, padding);
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const std::size_t iy_p = oy * stride + ky;
              if (iy_p < padding || iy_p - padding >= H) continue;
              const double* irow = iplane + (iy_p - padding) * W;
              double* orow = oplane + oy * OW;
              for (std::size_t ox = cols.begin; ox < cols.end; ++ox) {
                orow[ox] += kv * irow[ox * stride + kx - padding];
              }
            }
          }
        }
      }
    }
  }

  return t.record(
      "conv2d", {input, kernel}, std::move(out),
      [ii = input.id, ik = kernel.id, stride, padding, B, C, H, W, O, KH, KW, OH, OW](Tape& tp, std::size_t self) {
        const double* gp = tp.grad_of(self).values().data();
        const double* ip = tp.value(ii).values().data();
        const double* kp = tp.value(ik).values().data();
        Tensor* gin = tp.grad_sink(ii);
        Tensor* gk = tp.grad_sink(ik);
        double* gip = gin ? gin->values().data() : nullptr;
        double* gkp = gk ? gk->values().data() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t o = 0; o < O; ++o) {
            const double* gplane = gp + (b * O + o) * OH * OW;
            for (std::size_t c = 0; c < C; ++c) {
              const double* iplane = ip + (b * C + c) * H * W;
              double* giplane = gip ? gip + (b * C + c) * H * W : nullptr;
              for (std::size_t ky = 0; ky < KH; ++ky) {
                for (std::size_t kx = 0; kx < KW; ++kx) {
                  const std::size_t kidx = ((o * C + c) * KH + ky) * KW + kx;
                  const double kv = kp[kidx];
                  const auto cols = detail::valid_outputs(W, OW, stride, kx, padding);
                  double kacc = 0.0;
                  for (std::size_t oy = 0; oy < OH; ++oy) {
                    const std::size_t iy_p = oy * stride + ky;
                    if (iy_p < padding || iy_p - padding >= H) continue;
                    const std::size_t row = (iy_p - padding) * W;
                    const double* grow = gplane + oy * OW;
                    if (giplane) {
                      double* girow = giplane + row;
                      for (std::size_t ox = cols.begin; ox < cols.end; ++ox) {
                        girow[ox * stride + kx - padding] += kv * grow[ox];
                      }
                    }
                    if (gkp) {
                      const double* irow = iplane + row;
                      for (std::size_t ox = cols.begin; ox < cols.end; ++ox) {
                        kacc += grow[ox] * irow[ox * stride + kx - padding];
                      }
                    }
                  }
                  if (gkp) gkp[kidx] += kacc;
                }
              }
            }
          }
        }
      });
}

/// Adds bias[c] to every pixel of channel c.
inline Var bias_add(Var input, Var bias) {
  Tape& t = detail::common_tape(input, bias, "bias_add");
  const Tensor& in = input.value();
  const Tensor& bv = bias.value();
  require_rank4(in, "bias_add");
  if (bv.rank() != 1 || bv.dim(0) != in.channels()) {
    throw ShapeError("bias_add: bias shape " + to_string(bv.shape()) + " does not match " +
                     std::to_string(in.channels()) + " channels");
  }
  const std::size_t B = in.batch(), C = in.channels(), plane = in.height() * in.width();
  Tensor out = in;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      double* p = out.values().data() + (b * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bv[c];
    }
  }
  return t.record("bias_add", {input, bias}, std::move(out),
                  [ii = input.id, ib = bias.id, B, C, plane](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_of(self);
                    if (Tensor* gi = tp.grad_sink(ii)) {
                      for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
                    }
                    if (Tensor* gb = tp.grad_sink(ib)) {
                      for (std::size_t b = 0; b < B; ++b) {
                        for (std::size_t c = 0; c < C; ++c) {
                          const double* p = g.values().data() + (b * C + c) * plane;
                          double s = 0.0;
                          for (std::size_t i = 0; i < plane; ++i) s += p[i];
                          (*gb)[c] += s;
                        }
                      }
                    }
                  });
}

/// Plain-tensor 2x2 mean pooling; h and w must be even.
inline Tensor avg_pool2(const Tensor& in) {
  require_rank4(in, "avg_pool2");
  const std::size_t H = in.height(), W = in.width();
  if (H % 2 != 0 || W % 2 != 0) {
    throw ShapeError("avg_pool2: extents must be even, got " + to_string(in.shape()) + "; crop or pad first");
  }
  const std::size_t planes = in.batch() * in.channels(), OH = H / 2, OW = W / 2;
  Tensor out(Shape{in.batch(), in.channels(), OH, OW});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = in.values().data() + p * H * W;
    double* dst = out.values().data() + p * OH * OW;
    for (std::size_t y = 0; y < OH; ++y) {
      const double* r0 = src + 2 * y * W;
      const double* r1 = r0 + W;
      for (std::size_t x = 0; x < OW; ++x) {
        dst[y * OW + x] = 0.25 * ((r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1]));
      }
    }
  }
  return out;
}

inline Var avg_pool2(Var input) {
  Tensor out = avg_pool2(input.value());
  const Shape in_shape = input.value().shape();
  return input.tape->record("avg_pool2", {input}, std::move(out), [ii = input.id, in_shape](Tape& tp, std::size_t self) {
    Tensor* gi = tp.grad_sink(ii);
    if (!gi) return;
    const Tensor& g = tp.grad_of(self);
    const std::size_t H = in_shape[2], W = in_shape[3], OH = H / 2, OW = W / 2;
    const std::size_t planes = in_shape[0] * in_shape[1];
    for (std::size_t p = 0; p < planes; ++p) {
      const double* gp = g.values().data() + p * OH * OW;
      double* dst = gi->values().data() + p * H * W;
      for (std::size_t y = 0; y < OH; ++y) {
        for (std::size_t x = 0; x < OW; ++x) {
          const double v = 0.25 * gp[y * OW + x];
          dst[2 * y * W + 2 * x] += v;
          dst[2 * y * W + 2 * x + 1] += v;
          dst[(2 * y + 1) * W + 2 * x] += v;
          dst[(2 * y + 1) * W + 2 * x + 1] += v;
        }
      }
    }
  });
}

/// Nearest-neighbour 2x upsampling.
inline Tensor upsample2(const Tensor& in) {
  require_rank4(in, "upsample2");
  const std::size_t H = in.height(), W = in.width(), planes = in.batch() * in.channels();
  Tensor out(Shape{in.batch(), in.channels(), 2 * H, 2 * W});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = in.values().data() + p * H * W;
    double* dst = out.values().data() + p * 4 * H * W;
    for (std::size_t y = 0; y < 2 * H; ++y) {
      for (std::size_t x = 0; x < 2 * W; ++x) dst[y * 2 * W + x] = src[(y / 2) * W + x / 2];
    }
  }
  return out;
}

inline Var upsample2(Var input) {
  Tensor out = upsample2(input.value());
  const Shape in_shape = input.value().shape();
  return input.tape->record("upsample2", {input}, std::move(out), [ii = input.id, in_shape](Tape& tp, std::size_t self) {
    Tensor* gi = tp.grad_sink(ii);
    if (!gi) return;
    const Tensor& g = tp.grad_of(self);
    const std::size_t H = in_shape[2], W = in_shape[3], planes = in_shape[0] * in_shape[1];
    for (std::size_t p = 0; p < planes; ++p) {
      const double* gp = g.values().data() + p * 4 * H * W;
      double* dst = gi->values().data() + p * H * W;
      for (std::size_t y = 0; y < 2 * H; ++y) {
        for (std::size_t x = 0; x < 2 * W; ++x) dst[(y / 2) * W + x / 2] += gp[y * 2 * W + x];
      }
    }
  });
}

/// Beyond +-36 the result would round to exactly 0 or 1 in double precision.
inline constexpr double kSigmoidClamp = 36.0;

inline double sigmoid(double x) {
  return 1.0 / (1.0 + std::exp(-std::clamp(x, -kSigmoidClamp, kSigmoidClamp)));
}

inline double elu(double x) { return x >= 0.0 ? x : std::exp(std::max(x, -kExpClamp)) - 1.0; }

inline Var sigmoid(Var a) {
  return detail::unary("sigmoid", a, [](double x) { return sigmoid(x); },
                       [](double x, double y) { return std::abs(x) > kSigmoidClamp ? 0.0 : y * (1.0 - y); });
}

inline Var elu(Var a) {
  return detail::unary("elu", a, [](double x) { return elu(x); },
                       [](double x, double y) { return x >= 0.0 ? 1.0 : (x < -kExpClamp ? 0.0 : y + 1.0); });
}

/// Concatenate along the channel axis.
inline Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  Tape& t = *parts[0].tape;
  const Tensor& first = parts[0].value();
  require_rank4(first, "concat_channels");
  const std::size_t B = first.batch(), H = first.height(), W = first.width(), plane = H * W;
  std::vector<std::size_t> offsets;
  std::size_t C = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    require_rank4(v, "concat_channels");
    if (v.batch() != B || v.height() != H || v.width() != W) {
      throw ShapeError("concat_channels: " + to_string(v.shape()) + " incompatible with " + to_string(first.shape()));
    }
    offsets.push_back(C);
    C += v.channels();
  }
  Tensor out(Shape{B, C, H, W});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t b = 0; b < B; ++b) {
      const double* src = v.values().data() + b * v.channels() * plane;
      std::copy(src, src + v.channels() * plane, out.values().data() + (b * C + offsets[k]) * plane);
    }
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  return t.record("concat_channels", parts, std::move(out), [ids, offsets, B, C, plane](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor* gi = tp.grad_sink(ids[k]);
      if (!gi) continue;
      const std::size_t ck = gi->dim(1);
      for (std::size_t b = 0; b < B; ++b) {
        const double* src = g.values().data() + (b * C + offsets[k]) * plane;
        double* dst = gi->values().data() + b * ck * plane;
        for (std::size_t i = 0; i < ck * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

/// Channels [first, first+count) of a 4-D variable.
inline Var slice_channels(Var input, std::size_t first, std::size_t count) {
  Tensor out = slice_channels(input.value(), first, count);
  const Shape in_shape = input.value().shape();
  return input.tape->record("slice_channels", {input}, std::move(out),
                            [ii = input.id, in_shape, first, count](Tape& tp, std::size_t self) {
                              Tensor* gi = tp.grad_sink(ii);
                              if (!gi) return;
                              const Tensor& g = tp.grad_of(self);
                              const std::size_t plane = in_shape[2] * in_shape[3];
                              for (std::size_t b = 0; b < in_shape[0]; ++b) {
                                for (std::size_t c = 0; c < count; ++c) {
                                  const double* src = g.values().data() + (b * count + c) * plane;
                                  double* dst = gi->values().data() + (b * in_shape[1] + first + c) * plane;
                                  for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
                                }
                              }
                            });
}

/// Mean over the channel axis: [b,c,h,w] -> [b,1,h,w].
inline Var channel_mean(Var input) {
  const Tensor& in = input.value();
  require_rank4(in, "channel_mean");
  const std::size_t B = in.batch(), C = in.channels(), plane = in.height() * in.width();
  Tensor out(Shape{B, 1, in.height(), in.width()});
  for (std::size_t b = 0; b < B; ++b) {
    double* dst = out.values().data() + b * plane;
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = in.values().data() + (b * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < plane; ++i) dst[i] /= static_cast<double>(C);
  }
  return input.tape->record("channel_mean", {input}, std::move(out), [ii = input.id, B, C, plane](Tape& tp, std::size_t self) {
    Tensor* gi = tp.grad_sink(ii);
    if (!gi) return;
    const Tensor& g = tp.grad_of(self);
    const double inv = 1.0 / static_cast<double>(C);
    for (std::size_t b = 0; b < B; ++b) {
      const double* src = g.values().data() + b * plane;
      for (std::size_t c = 0; c < C; ++c) {
        double* dst = gi->values().data() + (b * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i] * inv;
      }
    }
  });
}

}  // namespace dnm

#endif  // DNM_LAYERS_HPP
