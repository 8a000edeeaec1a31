#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dnm/evaluation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dnm;

namespace {

Tensor depth_of(std::vector<double> v) {
  const std::size_t w = v.size();
  return Tensor(Shape{1, 1, 1, w}, std::move(v));
}

Tensor scaled(const Tensor& t, double k) {
  Tensor out = t;
  for (double& v : out.values()) v *= k;
  return out;
}

}  // namespace

TEST(Depth, FromDisparity) {
  const CameraRig rig;  // f = 100 px, B = 0.54 m
  const DepthMap d = disparity_to_depth(depth_of({10.0, 54.0, 0.0, -2.0}), rig);
  EXPECT_DOUBLE_EQ(d.depth[0], 5.4);
  EXPECT_DOUBLE_EQ(d.depth[1], 1.0);
  EXPECT_DOUBLE_EQ(d.depth[2], 5400.0);
  EXPECT_DOUBLE_EQ(d.depth[3], 5400.0);
  EXPECT_EQ(d.clamped, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_THROW(disparity_to_depth(depth_of({1.0}), CameraRig{0.0, 0.5}), ConfigError);
}

TEST(Depth, GroundTruthMasksNonPositive) {
  const DepthMap g = ground_truth_depth(depth_of({27.0, 0.0}), CameraRig{});
  EXPECT_DOUBLE_EQ(g.depth[0], 2.0);
  EXPECT_EQ(g.valid, (std::vector<std::uint8_t>{1, 0}));
}

TEST(Metrics, PerfectPrediction) {
  const Tensor g = depth_of({1.0, 2.0, 5.0, 40.0});
  const MetricsReport r = compute_metrics(depth_map(g), depth_map(g));
  EXPECT_EQ(r.abs_rel, 0.0);
  EXPECT_EQ(r.sq_rel, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.rmse_log, 0.0);
  EXPECT_EQ(r.a1, 1.0);
  EXPECT_EQ(r.pixels, 4u);
}

TEST(Metrics, UniformOverestimateClosedForm) {
  const Tensor g = depth_of({1.0, 2.0, 5.0, 40.0});
  const MetricsReport r = compute_metrics(depth_map(scaled(g, 1.1)), depth_map(g));
  const double mean_g = (1.0 + 2.0 + 5.0 + 40.0) / 4.0;
  const double mean_g2 = (1.0 + 4.0 + 25.0 + 1600.0) / 4.0;
  EXPECT_NEAR(r.abs_rel, 0.1, 1e-12);
  EXPECT_NEAR(r.sq_rel, 0.01 * mean_g, 1e-12);
  EXPECT_NEAR(r.rmse, 0.1 * std::sqrt(mean_g2), 1e-12);
  EXPECT_NEAR(r.rmse_log, std::log(1.1), 1e-12);
  EXPECT_EQ(r.a1, 1.0);
  EXPECT_EQ(r.a2, 1.0);
  EXPECT_EQ(r.a3, 1.0);
}

TEST(Metrics, ThirtyPercentFailsFirstThresholdOnly) {
  const Tensor g = depth_of({1.0, 3.0, 9.0});
  const MetricsReport r = compute_metrics(depth_map(scaled(g, 1.3)), depth_map(g));
  EXPECT_EQ(r.a1, 0.0);
  EXPECT_EQ(r.a2, 1.0);
  EXPECT_EQ(r.a3, 1.0);
  EXPECT_NEAR(r.abs_rel, 0.3, 1e-12);
  EXPECT_NEAR(r.rmse_log, std::log(1.3), 1e-12);
}

TEST(Metrics, RangeExcludesGroundTruthAndClampsPrediction) {
  const MetricsReport r = compute_metrics(depth_map(depth_of({200.0, 10.0})), depth_map(depth_of({10.0, 100.0})));
  // only the first pixel is in range; its prediction is capped at 80
  EXPECT_EQ(r.pixels, 1u);
  EXPECT_NEAR(r.abs_rel, 7.0, 1e-12);
  EXPECT_THROW(compute_metrics(depth_map(depth_of({1.0})), depth_map(depth_of({0.0}))), ConfigError);
}

TEST(Metrics, MatchesLoopOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor g = test::random_tensor(rng, {1, 1, 6, 9}, 0.5, 90.0);
    const Tensor d = test::random_tensor(rng, {1, 1, 6, 9}, 0.0, 100.0);
    const MetricsReport r = compute_metrics(depth_map(d), depth_map(g));
    const oracle::Metrics o = oracle::metrics(d.storage(), g.storage());
    EXPECT_NEAR(r.abs_rel, o.abs_rel, 1e-10);
    EXPECT_NEAR(r.sq_rel, o.sq_rel, 1e-10);
    EXPECT_NEAR(r.rmse, o.rmse, 1e-10);
    EXPECT_NEAR(r.rmse_log, o.rmse_log, 1e-10);
    EXPECT_NEAR(r.a1, o.a1, 1e-12);
    EXPECT_NEAR(r.a2, o.a2, 1e-12);
    EXPECT_NEAR(r.a3, o.a3, 1e-12);
    EXPECT_LE(r.a1, r.a2);
    EXPECT_LE(r.a2, r.a3);
  }
}

TEST(Metrics, ErrorsGrowWithPerturbation) {
  Rng rng(22);
  const Tensor g = test::random_tensor(rng, {1, 1, 8, 8}, 1.0, 50.0);
  const Tensor noise = test::random_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0);
  double last_abs = -1, last_rmse = -1;
  for (double k : {0.0, 0.1, 0.2, 0.4}) {
    Tensor d = g;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 + k * noise[i];
    const MetricsReport r = compute_metrics(depth_map(d), depth_map(g));
    EXPECT_GE(r.abs_rel, last_abs);
    EXPECT_GE(r.rmse, last_rmse);
    last_abs = r.abs_rel;
    last_rmse = r.rmse;
  }
}

TEST(D1All, ThresholdNeedsBothConditions) {
  // 4 px off a 10 px truth: > 3 px and > 5 %
  EXPECT_EQ(d1_all(depth_of({14.0}), depth_of({10.0})), 100.0);
  // 4 px off a 100 px truth: only 4 %
  EXPECT_EQ(d1_all(depth_of({104.0}), depth_of({100.0})), 0.0);
  // 2 px off a 10 px truth: 20 % but under 3 px
  EXPECT_EQ(d1_all(depth_of({12.0}), depth_of({10.0})), 0.0);
  EXPECT_EQ(d1_all(depth_of({14.0, 10.0, 5.0}), depth_of({10.0, 10.0, 0.0})), 50.0);
}

TEST(PostProcess, ConstantPredictorIsUnchanged) {
  const DisparityPredictor constant = [](const Tensor& img) {
    return Tensor::image(img.batch(), 1, img.height(), img.width(), 0.07);
  };
  const Tensor out = post_process(constant, Tensor::image(1, 3, 4, 40, 0.2));
  for (double v : out.values()) EXPECT_NEAR(v, 0.07, 1e-15);
}

TEST(PostProcess, MatchesBlendOracle) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    // A fixed random map per trial, so the predictor ignores its input except for the flip.
    const Tensor base = test::random_tensor(rng, {1, 1, 3, 41}, 0.0, 0.3);
    const Tensor img = test::random_tensor(rng, {1, 3, 3, 41});
    const Tensor other = test::random_tensor(rng, {1, 1, 3, 41}, 0.0, 0.3);
    const DisparityPredictor p = [&](const Tensor& x) { return x == img ? base : other; };
    const Tensor expected = oracle::post_process_blend(base, flip_horizontal(other));
    EXPECT_LT(test::max_abs_diff(post_process(p, img), expected), 1e-12);
  }
}

TEST(PostProcess, RampWeights) {
  EXPECT_EQ(pp_left_weight(0, 101), 1.0);
  EXPECT_NEAR(pp_left_weight(1, 101), 0.8, 1e-12);
  EXPECT_EQ(pp_left_weight(5, 101), 0.0);
  EXPECT_EQ(pp_left_weight(50, 101), 0.0);
}

TEST(PostProcess, FlipEquivariantForMirrorSymmetricPredictor) {
  // A predictor that commutes with flipping gives a post-processed map that does too.
  const DisparityPredictor p = [](const Tensor& x) {
    Tensor d = Tensor::image(x.batch(), 1, x.height(), x.width());
    for (std::size_t y = 0; y < x.height(); ++y)
      for (std::size_t i = 0; i < x.width(); ++i) d.at(0, 0, y, i) = 0.1 * x.at(0, 0, y, i);
    return d;
  };
  Rng rng(24);
  const Tensor img = test::random_tensor(rng, {1, 3, 4, 30});
  EXPECT_LT(test::max_abs_diff(post_process(p, flip_horizontal(img)), flip_horizontal(post_process(p, img))), 1e-15);
}

TEST(EvaluateSet, MeanOfPerImageReports) {
  std::vector<StereoSample> samples;
  for (std::size_t i = 0; i < 3; ++i) {
    SceneSpec s;
    s.height = 8;
    s.width = 32;
    s.profile = DisparityProfile::two_plane;
    s.disparity_px = 2.0 + static_cast<double>(i);
    s.disparity_bottom_px = 6.0;
    samples.push_back(generate_scene(s));
  }
  const DisparityPredictor p = [](const Tensor& img) {
    return Tensor::image(img.batch(), 1, img.height(), img.width(), 2.0 / 32.0);
  };
  const EvaluationResult r = evaluate_set(p, samples, CameraRig{}, false);
  ASSERT_EQ(r.per_image.size(), 3u);
  double abs_rel = 0, d1 = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const MetricsReport one = evaluate_image(p(samples[i].left), *samples[i].gt_disparity, CameraRig{});
    EXPECT_EQ(r.per_image[i].abs_rel, one.abs_rel);
    abs_rel += one.abs_rel;
    d1 += one.d1_all;
  }
  EXPECT_NEAR(r.mean.abs_rel, abs_rel / 3.0, 1e-15);
  EXPECT_NEAR(r.mean.d1_all, d1 / 3.0, 1e-12);
  // 2 px against the 6 px bottom plane is a d1 outlier, against 2..4 px it is not
  EXPECT_NEAR(r.mean.d1_all, 50.0, 1e-12);
}

TEST(EvaluateSet, SampleRigOverridesDefault) {
  SceneSpec s;
  s.height = 8;
  s.width = 32;
  StereoSample smp = generate_scene(s);
  smp.rig = CameraRig{200.0, 0.54};
  const DisparityPredictor p = [](const Tensor& img) {
    return Tensor::image(img.batch(), 1, img.height(), img.width(), 2.0 / 32.0);
  };
  const std::vector<StereoSample> one{smp};
  const MetricsReport r = evaluate_set(p, one, CameraRig{}, false).mean;
  // the ratio of depths does not depend on the rig unless clamping kicks in
  EXPECT_NEAR(r.abs_rel, 1.0, 1e-12);
  EXPECT_THROW(evaluate_set(p, std::span<const StereoSample>{}, CameraRig{}, false), ConfigError);
  smp.gt_disparity.reset();
  const std::vector<StereoSample> nogt{smp};
  EXPECT_THROW(evaluate_set(p, nogt, CameraRig{}, false), ConfigError);
}

TEST(MetricsCsv, HeaderAndRow) {
  EXPECT_EQ(metrics_csv_header(), "method,abs_rel,sq_rel,rmse,rmse_log,d1_all,a1,a2,a3");
  EXPECT_EQ(metrics_csv_header("image"), "image,abs_rel,sq_rel,rmse,rmse_log,d1_all,a1,a2,a3");
  MetricsReport r;
  r.abs_rel = 0.5;
  r.a1 = 1;
  EXPECT_EQ(metrics_csv_row("dnm6", r), "dnm6,0.5,0,0,0,0,1,0,0");
}
