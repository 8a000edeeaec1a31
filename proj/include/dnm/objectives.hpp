#ifndef DNM_OBJECTIVES_HPP
#define DNM_OBJECTIVES_HPP

#include <cstddef>
#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "dnm/autodiff.hpp"
#include "dnm/layers.hpp"
#include "dnm/stereo.hpp"

namespace dnm {

enum class ModelKind { dnm6 = 6, dnm12 = 12 };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::dnm6 ? "dnm6" : "dnm12"; }

/// Weights of the objective: `alpha` mixes SSIM and L1 inside the appearance
/// term, the other three weight the appearance, smoothness and left-right terms.
struct LossWeights {
  double alpha = 0.85;
  double alpha_ap = 1.0;
  double alpha_ds = 0.1;
  double alpha_lr = 1.0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("LossWeights: alpha must lie in [0, 1]");
    if (!(alpha_ap >= 0.0 && alpha_ds >= 0.0 && alpha_lr >= 0.0)) {
      throw ConfigError("LossWeights: alpha_ap, alpha_ds and alpha_lr must be non-negative");
    }
  }
};

/// Which image's edges attenuate the smoothness penalty of a cross disparity
/// (d_lr from CNN-L, d_rl from CNN-R). `network_input` uses the producing
/// network's input view; `disparity_view` uses the view the map belongs to.
enum class SmoothnessWeightSource { network_input, disparity_view };

struct ObjectiveOptions {
  SsimConstants ssim{};
  SmoothnessWeightSource smoothness_source = SmoothnessWeightSource::network_input;
};

/// mean( alpha * (1 - SSIM) / 2 + (1 - alpha) * |target - recon| ) over pixels and channels.
inline Var appearance_loss(Var target, Var recon, const LossWeights& w, SsimConstants k = {}) {
  require_same_shape(target.value(), recon.value(), "appearance_loss");
  const Var l1 = abs(target - recon);
  if (w.alpha == 0.0) return mean_all(l1);
  const Var dssim = scale(add_scalar(-ssim_map(target, recon, k), 1.0), 0.5);
  return mean_all(scale(dssim, w.alpha) + scale(l1, 1.0 - w.alpha));
}

/// Edge-aware smoothness: mean( |dx d| e^{-|dx I|} + |dy d| e^{-|dy I|} ), where
/// |dI| is averaged over the image channels. disp is [b,1,h,w].
inline Var smoothness_loss(Var disp, Var img) {
  const Tensor& d = disp.value();
  const Tensor& im = img.value();
  require_rank4(d, "smoothness_loss");
  require_rank4(im, "smoothness_loss");
  if (d.channels() != 1 || d.batch() != im.batch() || d.height() != im.height() || d.width() != im.width()) {
    throw ShapeError("smoothness_loss: disparity " + to_string(d.shape()) + " incompatible with image " +
                     to_string(im.shape()));
  }
  const auto dg = image_gradients(disp);
  const auto ig = image_gradients(img);
  const Var wx = exp(-channel_mean(abs(ig.gx)));
  const Var wy = exp(-channel_mean(abs(ig.gy)));
  return mean_all(abs(dg.gx) * wx + abs(dg.gy) * wy);
}

/// mean |d_a(x) - d_b sampled at x -/+ d_a(x) w|, the projection done by warp_horizontal.
inline Var lr_consistency_loss(Var d_a, Var d_b, WarpDirection direction) {
  require_same_shape(d_a.value(), d_b.value(), "lr_consistency_loss");
  const Var projected = warp_horizontal(d_b, d_a, direction);
  return mean_all(abs(d_a - projected));
}

/// Component names per scale, in breakdown/CSV order.
inline const std::vector<std::string>& component_names(ModelKind kind) {
  static const std::vector<std::string> six{"ap_l", "ap_r", "ds_l", "ds_r", "lr", "rl"};
  static const std::vector<std::string> twelve{"ap_ll", "ap_lr", "ap_rl", "ap_rr", "ds_ll", "ds_lr",
                                               "ds_rl", "ds_rr", "lr_l",  "rl_l",  "lr_r",  "rl_r"};
  return kind == ModelKind::dnm6 ? six : twelve;
}

inline std::size_t component_count(ModelKind kind) { return component_names(kind).size(); }

namespace detail {

// Components are ordered in three equal groups: appearance, smoothness, consistency.
template <typename T, typename Add, typename Scale>
T weighted_groups(const std::vector<T>& c, const LossWeights& w, Add add, Scale mul) {
  const std::size_t g = c.size() / 3;
  auto group = [&](std::size_t first) {
    T s = c[first];
    for (std::size_t i = 1; i < g; ++i) s = add(s, c[first + i]);
    return s;
  };
  return add(add(mul(group(0), w.alpha_ap), mul(group(g), w.alpha_ds)), mul(group(2 * g), w.alpha_lr));
}

}  // namespace detail

/// alpha_ap * sum(ap) + alpha_ds * sum(ds) + alpha_lr * sum(lr) over one scale's components.
inline Var combine_scale(const std::vector<Var>& components, const LossWeights& w) {
  if (components.empty() || components.size() % 3 != 0) throw ShapeError("combine_scale: expected 3 groups of components");
  return detail::weighted_groups<Var>(components, w, [](Var a, Var b) { return a + b; },
                                      [](Var a, double s) { return scale(a, s); });
}

inline double combine_scale(const std::vector<double>& components, const LossWeights& w) {
  if (components.empty() || components.size() % 3 != 0) throw ShapeError("combine_scale: expected 3 groups of components");
  return detail::weighted_groups<double>(components, w, [](double a, double b) { return a + b; },
                                         [](double a, double s) { return a * s; });
}

struct ScaleCost {
  std::vector<Var> components;
  Var total;
};

/// Scalar view of a cost: per-scale components, per-scale totals C_s and the grand total C.
struct LossBreakdown {
  ModelKind kind = ModelKind::dnm6;
  std::vector<std::vector<double>> components;
  std::vector<double> scale_totals;
  double total = 0.0;

  /// Weighted sum rebuilt from the stored components.
  double recompose(const LossWeights& w) const {
    double c = 0.0;
    for (const auto& s : components) c += combine_scale(s, w);
    return c;
  }

  double component(std::size_t scale, std::string_view name) const {
    const auto& names = component_names(kind);
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return components.at(scale).at(i);
    }
    throw ConfigError("LossBreakdown: unknown component " + std::string(name));
  }
};

struct CostResult {
  ModelKind kind = ModelKind::dnm6;
  std::vector<ScaleCost> scales;
  Var total;

  LossBreakdown breakdown() const {
    LossBreakdown b;
    b.kind = kind;
    for (const auto& s : scales) {
      std::vector<double> vals;
      for (const Var& c : s.components) vals.push_back(c.value().item());
      b.components.push_back(std::move(vals));
      b.scale_totals.push_back(s.total.value().item());
    }
    b.total = total.value().item();
    return b;
  }
};

/// One scale of the six-loss objective. d_l comes from CNN-L, d_r from CNN-R.
inline ScaleCost scale_cost_dnm6(Var img_l, Var img_r, Var d_l, Var d_r, const LossWeights& w,
                                 const ObjectiveOptions& opt = {}) {
  const Var recon_l = warp_horizontal(img_r, d_l, WarpDirection::leftward);
  const Var recon_r = warp_horizontal(img_l, d_r, WarpDirection::rightward);
  ScaleCost sc;
  sc.components = {
      appearance_loss(img_l, recon_l, w, opt.ssim),
      appearance_loss(img_r, recon_r, w, opt.ssim),
      smoothness_loss(d_l, img_l),
      smoothness_loss(d_r, img_r),
      lr_consistency_loss(d_l, d_r, WarpDirection::leftward),
      lr_consistency_loss(d_r, d_l, WarpDirection::rightward),
  };
  sc.total = combine_scale(sc.components, w);
  return sc;
}

/// One scale of the twelve-loss objective. CNN-L produces (d_ll, d_lr), CNN-R produces (d_rl, d_rr).
inline ScaleCost scale_cost_dnm12(Var img_l, Var img_r, Var d_ll, Var d_lr, Var d_rl, Var d_rr, const LossWeights& w,
                                  const ObjectiveOptions& opt = {}) {
  const bool by_network = opt.smoothness_source == SmoothnessWeightSource::network_input;
  const Var recon_ll = warp_horizontal(img_r, d_ll, WarpDirection::leftward);
  const Var recon_lr = warp_horizontal(img_l, d_lr, WarpDirection::rightward);
  const Var recon_rl = warp_horizontal(img_r, d_rl, WarpDirection::leftward);
  const Var recon_rr = warp_horizontal(img_l, d_rr, WarpDirection::rightward);
  ScaleCost sc;
  sc.components = {
      appearance_loss(img_l, recon_ll, w, opt.ssim),
      appearance_loss(img_r, recon_lr, w, opt.ssim),
      appearance_loss(img_l, recon_rl, w, opt.ssim),
      appearance_loss(img_r, recon_rr, w, opt.ssim),
      smoothness_loss(d_ll, img_l),
      smoothness_loss(d_lr, by_network ? img_l : img_r),
      smoothness_loss(d_rl, by_network ? img_r : img_l),
      smoothness_loss(d_rr, img_r),
      lr_consistency_loss(d_ll, d_lr, WarpDirection::leftward),
      lr_consistency_loss(d_lr, d_ll, WarpDirection::rightward),
      lr_consistency_loss(d_rl, d_rr, WarpDirection::leftward),
      lr_consistency_loss(d_rr, d_rl, WarpDirection::rightward),
  };
  sc.total = combine_scale(sc.components, w);
  return sc;
}

namespace detail {

inline void require_scale_counts(std::size_t n, std::initializer_list<std::size_t> others, const char* op) {
  if (n == 0) throw ShapeError(std::string(op) + ": no scales");
  for (std::size_t m : others) {
    if (m != n) {
      throw ShapeError(std::string(op) + ": scale-count mismatch (" + std::to_string(n) + " vs " + std::to_string(m) + ")");
    }
  }
}

inline Var sum_scales(const std::vector<ScaleCost>& scales) {
  Var total = scales[0].total;
  for (std::size_t s = 1; s < scales.size(); ++s) total = total + scales[s].total;
  return total;
}

}  // namespace detail

/// C = sum over scales of C_s. Pyramids are ordered finest first.
inline CostResult total_cost_dnm6(const std::vector<Var>& pyr_l, const std::vector<Var>& pyr_r,
                                  const std::vector<Var>& disp_l, const std::vector<Var>& disp_r, const LossWeights& w,
                                  const ObjectiveOptions& opt = {}) {
  detail::require_scale_counts(pyr_l.size(), {pyr_r.size(), disp_l.size(), disp_r.size()}, "total_cost_dnm6");
  CostResult r;
  r.kind = ModelKind::dnm6;
  for (std::size_t s = 0; s < pyr_l.size(); ++s) {
    r.scales.push_back(scale_cost_dnm6(pyr_l[s], pyr_r[s], disp_l[s], disp_r[s], w, opt));
  }
  r.total = detail::sum_scales(r.scales);
  return r;
}

/// DNM12 total. disp_l holds CNN-L's two-channel maps (channel 0 = d_ll, 1 = d_lr);
/// disp_r holds CNN-R's (channel 0 = d_rr, 1 = d_rl).
inline CostResult total_cost_dnm12(const std::vector<Var>& pyr_l, const std::vector<Var>& pyr_r,
                                   const std::vector<Var>& disp_l, const std::vector<Var>& disp_r,
                                   const LossWeights& w, const ObjectiveOptions& opt = {}) {
  detail::require_scale_counts(pyr_l.size(), {pyr_r.size(), disp_l.size(), disp_r.size()}, "total_cost_dnm12");
  CostResult r;
  r.kind = ModelKind::dnm12;
  for (std::size_t s = 0; s < pyr_l.size(); ++s) {
    if (disp_l[s].value().channels() != 2 || disp_r[s].value().channels() != 2) {
      throw ShapeError("total_cost_dnm12: disparity maps need 2 channels");
    }
    const Var d_ll = slice_channels(disp_l[s], 0, 1);
    const Var d_lr = slice_channels(disp_l[s], 1, 1);
    const Var d_rr = slice_channels(disp_r[s], 0, 1);
    const Var d_rl = slice_channels(disp_r[s], 1, 1);
    r.scales.push_back(scale_cost_dnm12(pyr_l[s], pyr_r[s], d_ll, d_lr, d_rl, d_rr, w, opt));
  }
  r.total = detail::sum_scales(r.scales);
  return r;
}

inline CostResult total_cost(ModelKind kind, const std::vector<Var>& pyr_l, const std::vector<Var>& pyr_r,
                             const std::vector<Var>& disp_l, const std::vector<Var>& disp_r, const LossWeights& w,
                             const ObjectiveOptions& opt = {}) {
  return kind == ModelKind::dnm6 ? total_cost_dnm6(pyr_l, pyr_r, disp_l, disp_r, w, opt)
                                 : total_cost_dnm12(pyr_l, pyr_r, disp_l, disp_r, w, opt);
}

/// Shortest decimal that parses back to the same double; used by every CSV writer.
inline std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Loss-history CSV: step,lr,C, then for each scale s: s<s>_C followed by its components.
inline std::string loss_csv_header(ModelKind kind, std::size_t scales) {
  std::string h = "step,lr,C";
  for (std::size_t s = 1; s <= scales; ++s) {
    const std::string p = "s" + std::to_string(s) + "_";
    h += "," + p + "C";
    for (const auto& n : component_names(kind)) h += "," + p + n;
  }
  return h;
}

inline std::string loss_csv_row(std::size_t step, double lr, const LossBreakdown& b) {
  std::string row = std::to_string(step) + "," + format_number(lr) + "," + format_number(b.total);
  for (std::size_t s = 0; s < b.components.size(); ++s) {
    row += "," + format_number(b.scale_totals[s]);
    for (double c : b.components[s]) row += "," + format_number(c);
  }
  return row;
}

}  // namespace dnm

#endif  // DNM_OBJECTIVES_HPP
