#ifndef DNM_GRADCHECK_SUITE_HPP
#define DNM_GRADCHECK_SUITE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dnm/dualnet.hpp"
#include "dnm/gradcheck.hpp"
#include "dnm/layers.hpp"
#include "dnm/objectives.hpp"
#include "dnm/rng.hpp"
#include "dnm/stereo.hpp"

namespace dnm {

struct GradCheckEntry {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  GradCheckResult worst{};

  bool passed() const { return max_error < tolerance; }
};

inline constexpr double kSmoothTolerance = 1e-6;
inline constexpr double kGeneralTolerance = 1e-4;
// Deep weights see gradients near 1e-9; a larger step keeps central-difference
// roundoff well below them.
inline constexpr double kNetworkStep = 2e-4;

namespace detail {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Values with |v| in [0.2, 1.5] and random sign, away from the kink of abs.
inline Tensor signed_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.2, 1.5);
  return t;
}

// Disparity (width fraction) whose pixel shift is band + 0.5 + checker(x + y) + U(-0.3, 0.3), with
// band = first_band + 2 * channel. Sample coordinates stay 0.2 px from integers, horizontal and
// vertical neighbours differ by at least 0.4 px, and maps two bands apart never come within 0.4 px,
// so no interpolation breakpoint or abs kink lies within a small step of the point.
inline Tensor kink_free_disparity(Rng& rng, const Shape& shape, double first_band) {
  Tensor t(shape);
  const std::size_t W = t.width();
  for (std::size_t b = 0; b < t.batch(); ++b)
    for (std::size_t c = 0; c < t.channels(); ++c)
      for (std::size_t y = 0; y < t.height(); ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double px = first_band + 2.0 * static_cast<double>(c) + 0.5 + static_cast<double>((x + y) % 2) +
                            rng.uniform(-0.3, 0.3);
          t.at(b, c, y, x) = px / static_cast<double>(W);
        }
  return t;
}

// Image in [base, base + 0.34] built from a pixel and a 2x2-block checkerboard, so neighbouring
// values differ by at least 0.06 at full and half resolution. Images with bases 0.5 apart never
// come closer than 0.16.
inline Tensor kink_free_image(Rng& rng, const Shape& shape, double base) {
  Tensor t(shape);
  for (std::size_t b = 0; b < t.batch(); ++b)
    for (std::size_t c = 0; c < t.channels(); ++c)
      for (std::size_t y = 0; y < t.height(); ++y)
        for (std::size_t x = 0; x < t.width(); ++x) {
          t.at(b, c, y, x) = base + 0.2 * static_cast<double>((x + y) % 2) +
                             0.1 * static_cast<double>((x / 2 + y / 2) % 2) + rng.uniform(0.0, 0.04);
        }
  return t;
}

// sum(y * r) for a fixed random r, so every output element contributes.
inline Var project(Tape& tape, Var y, std::uint64_t seed) {
  Rng rng(seed);
  return sum_all(y * tape.constant(random_tensor(rng, y.shape(), 0.5, 1.5)));
}

}  // namespace detail

/// The full finite-difference suite: every differentiable op, a small network
/// forward pass, and both total costs on 2x8x16 pairs with two scales.
inline std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed = 7, double eps = 1e-5) {
  Rng rng(seed);
  std::vector<GradCheckEntry> out;
  auto check = [&](const std::string& name, double tol, const ScalarFn& f, const std::vector<Tensor>& pts,
                   double step = 0.0) {
    const GradCheckResult r = grad_check_detailed(f, pts, step > 0.0 ? step : eps);
    out.push_back({name, r.max_relative_error, tol, r});
  };
  const Shape s{2, 3, 4, 6};
  const Shape disp_shape{2, 1, 4, 6};
  auto P = [](Tape& t, Var y) { return detail::project(t, y, 99); };

  check("add", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, v[0] + v[1]); },
        {detail::signed_tensor(rng, s), detail::signed_tensor(rng, s)});
  check("sub", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, v[0] - v[1]); },
        {detail::signed_tensor(rng, s), detail::signed_tensor(rng, s)});
  check("mul", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, v[0] * v[1]); },
        {detail::signed_tensor(rng, s), detail::signed_tensor(rng, s)});
  check("div", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, v[0] / v[1]); },
        {detail::signed_tensor(rng, s), detail::signed_tensor(rng, s)});
  check("neg", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, -v[0]); },
        {detail::signed_tensor(rng, s)});
  check("scale", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, scale(v[0], -2.5)); },
        {detail::signed_tensor(rng, s)});
  check("add_scalar", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, add_scalar(v[0], 0.7)); },
        {detail::signed_tensor(rng, s)});
  check("abs", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, abs(v[0])); },
        {detail::signed_tensor(rng, s)});
  check("exp", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, exp(v[0])); },
        {detail::signed_tensor(rng, s)});
  check("square", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, square(v[0])); },
        {detail::signed_tensor(rng, s)});
  check("sigmoid", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, sigmoid(v[0])); },
        {detail::signed_tensor(rng, s)});
  check("elu", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, elu(v[0])); },
        {detail::signed_tensor(rng, s)});
  check("sum_all", kSmoothTolerance, [](Tape&, const std::vector<Var>& v) { return sum_all(v[0]); },
        {detail::signed_tensor(rng, s)});
  check("mean_all", kSmoothTolerance, [](Tape&, const std::vector<Var>& v) { return mean_all(v[0]); },
        {detail::signed_tensor(rng, s)});

  check("conv2d 3x3/1", kGeneralTolerance,
        [&](Tape& t, const std::vector<Var>& v) { return P(t, conv2d(v[0], v[1], 1, 1)); },
        {detail::signed_tensor(rng, {2, 3, 5, 6}), detail::signed_tensor(rng, {4, 3, 3, 3})});
  check("conv2d 4x4/2", kGeneralTolerance,
        [&](Tape& t, const std::vector<Var>& v) { return P(t, conv2d(v[0], v[1], 2, 1)); },
        {detail::signed_tensor(rng, {2, 3, 6, 8}), detail::signed_tensor(rng, {2, 3, 4, 4})});
  check("bias_add", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, bias_add(v[0], v[1])); },
        {detail::signed_tensor(rng, s), detail::signed_tensor(rng, {3})});
  check("avg_pool2", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, avg_pool2(v[0])); },
        {detail::signed_tensor(rng, s)});
  check("upsample2", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, upsample2(v[0])); },
        {detail::signed_tensor(rng, s)});
  check("concat_channels", kSmoothTolerance,
        [&](Tape& t, const std::vector<Var>& v) { return P(t, concat_channels({v[0], v[1]})); },
        {detail::signed_tensor(rng, s), detail::signed_tensor(rng, disp_shape)});
  check("slice_channels", kSmoothTolerance,
        [&](Tape& t, const std::vector<Var>& v) { return P(t, slice_channels(v[0], 1, 2)); },
        {detail::signed_tensor(rng, s)});
  check("channel_mean", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, channel_mean(v[0])); },
        {detail::signed_tensor(rng, s)});

  const Shape img{2, 3, 8, 16};
  const Shape dimg{2, 1, 8, 16};
  for (auto dir : {WarpDirection::leftward, WarpDirection::rightward}) {
    const std::string name = dir == WarpDirection::leftward ? "warp_horizontal (leftward)" : "warp_horizontal (rightward)";
    check(name, kGeneralTolerance,
          [&, dir](Tape& t, const std::vector<Var>& v) { return P(t, warp_horizontal(v[0], v[1], dir)); },
          {detail::random_tensor(rng, img, 0.0, 1.0), detail::kink_free_disparity(rng, dimg, 0.0)});
  }
  check("box3", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, box3(v[0])); },
        {detail::random_tensor(rng, img, 0.0, 1.0)});
  check("ssim_map", kGeneralTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, ssim_map(v[0], v[1])); },
        {detail::random_tensor(rng, img, 0.0, 1.0), detail::random_tensor(rng, img, 0.0, 1.0)});
  check("diff_x", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, diff_x(v[0])); },
        {detail::signed_tensor(rng, s)});
  check("diff_y", kSmoothTolerance, [&](Tape& t, const std::vector<Var>& v) { return P(t, diff_y(v[0])); },
        {detail::signed_tensor(rng, s)});

  const LossWeights w{};
  check("appearance_loss", kGeneralTolerance,
        [&](Tape&, const std::vector<Var>& v) { return appearance_loss(v[0], v[1], w); },
        {detail::kink_free_image(rng, img, 0.55), detail::kink_free_image(rng, img, 0.05)});
  check("smoothness_loss", kGeneralTolerance,
        [](Tape&, const std::vector<Var>& v) { return smoothness_loss(v[0], v[1]); },
        {detail::kink_free_disparity(rng, dimg, 1.0), detail::kink_free_image(rng, img, 0.3)});
  check("lr_consistency_loss", kGeneralTolerance,
        [](Tape&, const std::vector<Var>& v) { return lr_consistency_loss(v[0], v[1], WarpDirection::leftward); },
        {detail::kink_free_disparity(rng, dimg, 1.0), detail::kink_free_disparity(rng, dimg, 3.0)});

  {
    NetworkConfig cfg;
    cfg.base_filters = 2;
    cfg.seed = seed;
    const NetworkParams p = init_params(cfg);
    const Tensor image = detail::random_tensor(rng, {1, 3, 16, 16}, 0.0, 1.0);
    check("network forward", kGeneralTolerance,
          [&](Tape& t, const std::vector<Var>& v) {
            const auto pyr = forward(cfg, v, t.constant(image));
            Var acc = mean_all(pyr[0]);
            for (std::size_t k = 1; k < pyr.size(); ++k) acc = acc + mean_all(pyr[k]);
            return acc;
          },
          p.tensors, kNetworkStep);
  }

  for (ModelKind kind : {ModelKind::dnm6, ModelKind::dnm12}) {
    const std::size_t dc = kind == ModelKind::dnm6 ? 1 : 2;
    std::vector<Tensor> pts{detail::kink_free_image(rng, img, 0.55), detail::kink_free_image(rng, img, 0.05)};
    for (std::size_t sc = 0; sc < 2; ++sc) {
      const Shape ds{2, dc, 8u >> sc, 16u >> sc};
      // DNM6: d_l and d_r in different bands. DNM12: each network's two channels in different bands.
      pts.push_back(detail::kink_free_disparity(rng, ds, 1.0));
      pts.push_back(detail::kink_free_disparity(rng, ds, kind == ModelKind::dnm6 ? 3.0 : 1.0));
    }
    check(std::string("total_cost ") + std::string(to_string(kind)), kGeneralTolerance,
          [kind, w](Tape&, const std::vector<Var>& v) {
            const std::vector<Var> pl{v[0], avg_pool2(v[0])};
            const std::vector<Var> pr{v[1], avg_pool2(v[1])};
            return total_cost(kind, pl, pr, {v[2], v[4]}, {v[3], v[5]}, w).total;
          },
          pts);
  }
  return out;
}

}  // namespace dnm

#endif  // DNM_GRADCHECK_SUITE_HPP
