#ifndef DNM_CONFIG_HPP
#define DNM_CONFIG_HPP

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dnm/dualnet.hpp"
#include "dnm/error.hpp"
#include "dnm/scene.hpp"
#include "dnm/trainer.hpp"

namespace dnm {

namespace detail {

using Json = nlohmann::ordered_json;

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
void read_field(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline void read_count(const Json& obj, const char* key, std::size_t& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const Json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where + "." + key + ": expected a non-negative integer");
  out = v.get<std::size_t>();
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "dnm6") return ModelKind::dnm6;
  if (s == "dnm12") return ModelKind::dnm12;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected dnm6 or dnm12)");
}

inline SmoothnessWeightSource parse_smoothness_source(std::string_view s) {
  if (s == "network-input") return SmoothnessWeightSource::network_input;
  if (s == "disparity-view") return SmoothnessWeightSource::disparity_view;
  throw ConfigError("unknown smoothness_weight_source '" + std::string(s) + "'");
}

inline const char* to_string(SmoothnessWeightSource s) {
  return s == SmoothnessWeightSource::network_input ? "network-input" : "disparity-view";
}

}  // namespace detail

/// Parses a training configuration. Missing keys keep their defaults; unknown
/// keys and type mismatches throw ConfigError. The result is validated.
inline TrainConfig parse_train_config(const std::string& text) {
  detail::Json j;
  try {
    j = detail::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  const std::string where = "config";
  detail::reject_unknown(j,
                         {"model", "epochs", "steps_per_epoch", "batch_size", "weights", "lr_phase1", "lr_phase2",
                          "lr_phase3", "phase1_end", "phase2_end", "augment", "smoothness_weight_source", "network", "seed"},
                         where);
  TrainConfig cfg;
  if (j.contains("model")) {
    std::string m;
    detail::read_field(j, "model", m, where);
    cfg.model = detail::parse_model_kind(m);
  }
  detail::read_count(j, "epochs", cfg.epochs, where);
  detail::read_count(j, "steps_per_epoch", cfg.steps_per_epoch, where);
  detail::read_count(j, "batch_size", cfg.batch_size, where);
  detail::read_field(j, "lr_phase1", cfg.lr_phase1, where);
  detail::read_field(j, "lr_phase2", cfg.lr_phase2, where);
  detail::read_field(j, "lr_phase3", cfg.lr_phase3, where);
  detail::read_count(j, "phase1_end", cfg.phase1_end, where);
  detail::read_count(j, "phase2_end", cfg.phase2_end, where);
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0)) {
      throw ConfigError("config.seed: expected a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    detail::reject_unknown(w, {"alpha", "alpha_ap", "alpha_ds", "alpha_lr"}, "config.weights");
    detail::read_field(w, "alpha", cfg.weights.alpha, "config.weights");
    detail::read_field(w, "alpha_ap", cfg.weights.alpha_ap, "config.weights");
    detail::read_field(w, "alpha_ds", cfg.weights.alpha_ds, "config.weights");
    detail::read_field(w, "alpha_lr", cfg.weights.alpha_lr, "config.weights");
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    detail::reject_unknown(a, {"photometric", "flip"}, "config.augment");
    detail::read_field(a, "photometric", cfg.augment.photometric, "config.augment");
    detail::read_field(a, "flip", cfg.augment.flip, "config.augment");
  }
  if (j.contains("smoothness_weight_source")) {
    std::string s;
    detail::read_field(j, "smoothness_weight_source", s, where);
    cfg.smoothness_source = detail::parse_smoothness_source(s);
  }
  if (j.contains("network")) {
    const auto& n = j.at("network");
    detail::reject_unknown(n, {"input_channels", "base_filters", "encoder_depth", "d_max_frac"}, "config.network");
    detail::read_count(n, "input_channels", cfg.network.input_channels, "config.network");
    detail::read_count(n, "base_filters", cfg.network.base_filters, "config.network");
    detail::read_count(n, "encoder_depth", cfg.network.encoder_depth, "config.network");
    detail::read_field(n, "d_max_frac", cfg.network.d_max_frac, "config.network");
  }
  cfg.validate();
  return cfg;
}

inline std::string train_config_json(const TrainConfig& cfg) {
  detail::Json j;
  j["model"] = to_string(cfg.model);
  j["epochs"] = cfg.epochs;
  j["steps_per_epoch"] = cfg.steps_per_epoch;
  j["batch_size"] = cfg.batch_size;
  j["weights"] = {{"alpha", cfg.weights.alpha},
                  {"alpha_ap", cfg.weights.alpha_ap},
                  {"alpha_ds", cfg.weights.alpha_ds},
                  {"alpha_lr", cfg.weights.alpha_lr}};
  j["lr_phase1"] = cfg.lr_phase1;
  j["lr_phase2"] = cfg.lr_phase2;
  j["lr_phase3"] = cfg.lr_phase3;
  j["phase1_end"] = cfg.phase1_end;
  j["phase2_end"] = cfg.phase2_end;
  j["augment"] = {{"photometric", cfg.augment.photometric}, {"flip", cfg.augment.flip}};
  j["smoothness_weight_source"] = detail::to_string(cfg.smoothness_source);
  j["network"] = {{"input_channels", cfg.network.input_channels},
                  {"base_filters", cfg.network.base_filters},
                  {"encoder_depth", cfg.network.encoder_depth},
                  {"d_max_frac", cfg.network.d_max_frac}};
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

inline TrainConfig load_train_config(const std::string& path) { return parse_train_config(detail::read_file(path)); }

// --- rig.json ---------------------------------------------------------------

inline CameraRig parse_rig(const std::string& text) {
  detail::Json j;
  try {
    j = detail::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("rig: invalid JSON: ") + e.what());
  }
  detail::reject_unknown(j, {"focal_px", "baseline_m"}, "rig");
  CameraRig rig;
  detail::read_field(j, "focal_px", rig.focal_px, "rig");
  detail::read_field(j, "baseline_m", rig.baseline_m, "rig");
  rig.validate();
  return rig;
}

inline std::string rig_json(const CameraRig& rig) {
  detail::Json j;
  j["focal_px"] = rig.focal_px;
  j["baseline_m"] = rig.baseline_m;
  return j.dump(2) + "\n";
}

/// rig.json from a scene directory, or the default rig when absent.
inline CameraRig load_rig_or_default(const std::filesystem::path& dir) {
  const auto p = dir / "rig.json";
  if (!std::filesystem::exists(p)) return CameraRig{};
  return parse_rig(detail::read_file(p.string()));
}

}  // namespace dnm

#endif  // DNM_CONFIG_HPP
