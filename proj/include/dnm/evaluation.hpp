#ifndef DNM_EVALUATION_HPP
#define DNM_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnm/dualnet.hpp"
#include "dnm/objectives.hpp"
#include "dnm/scene.hpp"

namespace dnm {

struct DepthMap {
  Tensor depth;                       // metres, [b,1,h,w]
  std::vector<std::uint8_t> valid;    // 1 where depth is usable
  std::vector<std::uint8_t> clamped;  // 1 where the disparity hit the lower clamp
};

/// depth = f * B / max(d, min_disp_px) for a disparity in pixels. Every pixel is valid.
inline DepthMap disparity_to_depth(const Tensor& disp_px, const CameraRig& rig, double min_disp_px = 0.01) {
  rig.validate();
  if (!(min_disp_px > 0.0)) throw ConfigError("disparity_to_depth: min_disp_px must be positive");
  DepthMap d{Tensor(disp_px.shape()), std::vector<std::uint8_t>(disp_px.size(), 1),
             std::vector<std::uint8_t>(disp_px.size(), 0)};
  const double fb = rig.focal_px * rig.baseline_m;
  for (std::size_t i = 0; i < disp_px.size(); ++i) {
    double v = disp_px[i];
    if (!(v >= min_disp_px)) {
      v = min_disp_px;
      d.clamped[i] = 1;
    }
    d.depth[i] = fb / v;
  }
  return d;
}

/// Ground-truth depth: pixels with non-positive disparity are invalid.
inline DepthMap ground_truth_depth(const Tensor& gt_px, const CameraRig& rig) {
  rig.validate();
  DepthMap d{Tensor(gt_px.shape()), std::vector<std::uint8_t>(gt_px.size(), 0),
             std::vector<std::uint8_t>(gt_px.size(), 0)};
  const double fb = rig.focal_px * rig.baseline_m;
  for (std::size_t i = 0; i < gt_px.size(); ++i) {
    if (gt_px[i] > 0.0) {
      d.depth[i] = fb / gt_px[i];
      d.valid[i] = 1;
    }
  }
  return d;
}

inline DepthMap depth_map(Tensor depth) {
  const std::size_t n = depth.size();
  DepthMap d{std::move(depth), std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) d.valid[i] = d.depth[i] > 0.0 ? 1 : 0;
  return d;
}

struct MetricsReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double d1_all = 0.0;  // percent
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  std::size_t pixels = 0;
};

struct DepthRange {
  double min = 1e-3;
  double cap = 80.0;
};

/// Depth error metrics over pixels where G is valid and inside the range.
/// D is clamped into the range first. d1_all is left at 0 (see d1_all()).
inline MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt, DepthRange range = {}) {
  require_same_shape(pred.depth, gt.depth, "compute_metrics");
  MetricsReport r;
  double sum_abs_rel = 0, sum_sq_rel = 0, sum_sq = 0, sum_sq_log = 0;
  std::size_t n1 = 0, n2 = 0, n3 = 0, n = 0;
  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  for (std::size_t i = 0; i < gt.depth.size(); ++i) {
    const double g = gt.depth[i];
    if (!gt.valid[i] || !(g >= range.min && g <= range.cap)) continue;
    const double d = std::clamp(pred.depth[i], range.min, range.cap);
    const double diff = d - g;
    sum_abs_rel += std::abs(diff) / g;
    sum_sq_rel += diff * diff / g;
    sum_sq += diff * diff;
    const double ld = std::log(d) - std::log(g);
    sum_sq_log += ld * ld;
    const double ratio = std::max(d / g, g / d);
    n1 += ratio < t1;
    n2 += ratio < t2;
    n3 += ratio < t3;
    ++n;
  }
  if (n == 0) throw ConfigError("compute_metrics: no valid ground-truth pixels");
  const double N = static_cast<double>(n);
  r.abs_rel = sum_abs_rel / N;
  r.sq_rel = sum_sq_rel / N;
  r.rmse = std::sqrt(sum_sq / N);
  r.rmse_log = std::sqrt(sum_sq_log / N);
  r.a1 = static_cast<double>(n1) / N;
  r.a2 = static_cast<double>(n2) / N;
  r.a3 = static_cast<double>(n3) / N;
  r.pixels = n;
  return r;
}

/// Percentage of pixels with gt > 0 whose error exceeds both 3 px and 5 % of gt.
inline double d1_all(const Tensor& pred_px, const Tensor& gt_px) {
  require_same_shape(pred_px, gt_px, "d1_all");
  std::size_t bad = 0, n = 0;
  for (std::size_t i = 0; i < gt_px.size(); ++i) {
    const double g = gt_px[i];
    if (!(g > 0.0)) continue;
    const double e = std::abs(pred_px[i] - g);
    bad += (e > 3.0 && e > 0.05 * g) ? 1 : 0;
    ++n;
  }
  if (n == 0) throw ConfigError("d1_all: no valid ground-truth pixels");
  return 100.0 * static_cast<double>(bad) / static_cast<double>(n);
}

/// Returns a [b,1,h,w] width-fraction disparity for an image.
using DisparityPredictor = std::function<Tensor(const Tensor& image)>;

inline DisparityPredictor predictor_for(const DualModel& model, View view, std::size_t channel = 0) {
  return [&model, view, channel](const Tensor& image) { return predict_disparity(model, image, view, channel); };
}

/// Border blending weight of the flipped prediction at column x: 1 at the left
/// edge, falling linearly to 0 at 5 % of the width.
inline double pp_left_weight(std::size_t x, std::size_t w) {
  if (w < 2) return 0.0;
  const double u = static_cast<double>(x) / static_cast<double>(w - 1);
  return std::clamp(1.0 - u / 0.05, 0.0, 1.0);
}

/// Flip-and-blend post-processing: d1 = predict(image), d2 = flip(predict(flip(image)));
/// out = w_l * d2 + w_r * d1 + (1 - w_l - w_r) * (d1 + d2) / 2 with w_r the mirror of w_l.
inline Tensor post_process(const DisparityPredictor& predict, const Tensor& image) {
  const Tensor d1 = predict(image);
  const Tensor d2 = flip_horizontal(predict(flip_horizontal(image)));
  require_same_shape(d1, d2, "post_process");
  require_rank4(d1, "post_process");
  const std::size_t W = d1.width(), rows = d1.size() / W;
  std::vector<double> wl(W), wr(W);
  for (std::size_t x = 0; x < W; ++x) wl[x] = pp_left_weight(x, W);
  for (std::size_t x = 0; x < W; ++x) wr[x] = wl[W - 1 - x];
  Tensor out(d1.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t i = r * W + x;
      const double mean = 0.5 * (d1[i] + d2[i]);
      out[i] = wl[x] * d2[i] + wr[x] * d1[i] + (1.0 - wl[x] - wr[x]) * mean;
    }
  }
  return out;
}

inline Tensor post_process(const DualModel& model, const Tensor& image, View view, std::size_t channel = 0) {
  return post_process(predictor_for(model, view, channel), image);
}

/// All metrics for one image from width-fraction predicted and ground-truth disparities.
inline MetricsReport evaluate_image(const Tensor& pred_frac, const Tensor& gt_frac, const CameraRig& rig,
                                    DepthRange range = {}, double min_disp_px = 0.01) {
  require_same_shape(pred_frac, gt_frac, "evaluate_image");
  const Tensor pred_px = disparity_to_pixels(pred_frac);
  const Tensor gt_px = disparity_to_pixels(gt_frac);
  MetricsReport r = compute_metrics(disparity_to_depth(pred_px, rig, min_disp_px), ground_truth_depth(gt_px, rig), range);
  r.d1_all = d1_all(pred_px, gt_px);
  return r;
}

/// Field-wise mean over images.
inline MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw ConfigError("mean_report: no reports");
  MetricsReport m;
  for (const auto& r : reports) {
    m.abs_rel += r.abs_rel;
    m.sq_rel += r.sq_rel;
    m.rmse += r.rmse;
    m.rmse_log += r.rmse_log;
    m.d1_all += r.d1_all;
    m.a1 += r.a1;
    m.a2 += r.a2;
    m.a3 += r.a3;
    m.pixels += r.pixels;
  }
  const double n = static_cast<double>(reports.size());
  for (double* f : {&m.abs_rel, &m.sq_rel, &m.rmse, &m.rmse_log, &m.d1_all, &m.a1, &m.a2, &m.a3}) *f /= n;
  return m;
}

struct EvaluationResult {
  MetricsReport mean;
  std::vector<MetricsReport> per_image;
};

/// Per-image metrics (left view of every sample) averaged uniformly over images.
/// A sample's own rig takes precedence over `rig`.
inline EvaluationResult evaluate_set(const DisparityPredictor& predict, std::span<const StereoSample> samples,
                                     const CameraRig& rig, bool use_pp, DepthRange range = {}) {
  if (samples.empty()) throw ConfigError("evaluate_set: no samples");
  EvaluationResult res;
  for (const auto& s : samples) {
    if (!s.gt_disparity) throw ConfigError("evaluate_set: sample without ground truth");
    const Tensor pred = use_pp ? post_process(predict, s.left) : predict(s.left);
    res.per_image.push_back(evaluate_image(pred, *s.gt_disparity, s.rig.value_or(rig), range));
  }
  res.mean = mean_report(res.per_image);
  return res;
}

inline EvaluationResult evaluate_set(const DualModel& model, std::span<const StereoSample> samples, const CameraRig& rig,
                                     bool use_pp, DepthRange range = {}) {
  return evaluate_set(predictor_for(model, View::left), samples, rig, use_pp, range);
}

/// The first column names the evaluated method, or the image for per-image reports.
inline std::string metrics_csv_header(std::string_view key = "method") {
  return std::string(key) + ",abs_rel,sq_rel,rmse,rmse_log,d1_all,a1,a2,a3";
}

inline std::string metrics_csv_row(const std::string& label, const MetricsReport& r) {
  std::string row = label;
  for (double v : {r.abs_rel, r.sq_rel, r.rmse, r.rmse_log, r.d1_all, r.a1, r.a2, r.a3}) row += "," + format_number(v);
  return row;
}

}  // namespace dnm

#endif  // DNM_EVALUATION_HPP
