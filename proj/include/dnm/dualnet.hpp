#ifndef DNM_DUALNET_HPP
#define DNM_DUALNET_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "dnm/autodiff.hpp"
#include "dnm/layers.hpp"
#include "dnm/objectives.hpp"
#include "dnm/rng.hpp"

namespace dnm {

struct NetworkConfig {
  std::size_t input_channels = 3;
  std::size_t base_filters = 8;
  std::size_t encoder_depth = 4;
  std::size_t out_channels = 1;
  double d_max_frac = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_channels == 0 || base_filters == 0) throw ConfigError("NetworkConfig: channel counts must be positive");
    if (encoder_depth < 4) throw ConfigError("NetworkConfig: encoder_depth must be >= 4 for four output scales");
    if (encoder_depth > 12) throw ConfigError("NetworkConfig: encoder_depth too large");
    if (out_channels != 1 && out_channels != 2) throw ConfigError("NetworkConfig: out_channels must be 1 or 2");
    if (!(d_max_frac > 0.0 && d_max_frac < 1.0)) throw ConfigError("NetworkConfig: d_max_frac must lie in (0, 1)");
  }

  bool operator==(const NetworkConfig&) const = default;
};

inline constexpr std::size_t kOutputScales = 4;

/// Layer table for one encoder-decoder. Encoder stage k (1-based) halves the
/// resolution with a 4x4 stride-2 conv, then applies a 3x3 conv. The decoder
/// climbs back up with upsample + concat(skip, coarser disparity) + 3x3 conv,
/// and the four finest decoder levels carry a 3x3 disparity head.
struct LayerSpec {
  std::string name;
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t padding;
};

inline std::size_t encoder_channels(const NetworkConfig& cfg, std::size_t stage) {
  return stage == 0 ? cfg.input_channels : cfg.base_filters << (stage - 1);
}

inline std::size_t decoder_channels(const NetworkConfig& cfg, std::size_t level) {
  return level == 0 ? cfg.base_filters : encoder_channels(cfg, level);
}

inline std::vector<LayerSpec> layer_table(const NetworkConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> layers;
  const std::size_t D = cfg.encoder_depth;
  for (std::size_t k = 1; k <= D; ++k) {
    const std::size_t in = encoder_channels(cfg, k - 1), out = encoder_channels(cfg, k);
    layers.push_back({"enc" + std::to_string(k) + "_down", in, out, 4, 2, 1});
    layers.push_back({"enc" + std::to_string(k) + "_conv", out, out, 3, 1, 1});
  }
  for (std::size_t lvl = D; lvl-- > 0;) {
    const bool coarser_head = lvl + 1 < kOutputScales;
    const std::size_t in = decoder_channels(cfg, lvl + 1) + encoder_channels(cfg, lvl) +
                           (coarser_head ? cfg.out_channels : 0);
    const std::size_t out = decoder_channels(cfg, lvl);
    layers.push_back({"dec" + std::to_string(lvl) + "_conv", in, out, 3, 1, 1});
    if (lvl < kOutputScales) layers.push_back({"head" + std::to_string(lvl), out, cfg.out_channels, 3, 1, 1});
  }
  return layers;
}

/// Named kernels and biases of one network, ordered as in layer_table.
struct NetworkParams {
  NetworkConfig config;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  bool operator==(const NetworkParams&) const = default;
};

/// Glorot-uniform kernels, zero biases, drawn from a generator seeded with cfg.seed.
inline NetworkParams init_params(const NetworkConfig& cfg) {
  NetworkParams p;
  p.config = cfg;
  Rng rng(cfg.seed);
  for (const auto& l : layer_table(cfg)) {
    const double fan_in = static_cast<double>(l.in_channels * l.kernel * l.kernel);
    const double fan_out = static_cast<double>(l.out_channels * l.kernel * l.kernel);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor k(Shape{l.out_channels, l.in_channels, l.kernel, l.kernel});
    for (double& v : k.values()) v = rng.uniform(-limit, limit);
    p.names.push_back(l.name + ".w");
    p.tensors.push_back(std::move(k));
    p.names.push_back(l.name + ".b");
    p.tensors.push_back(Tensor(Shape{l.out_channels}, 0.0));
  }
  return p;
}

/// Runs one network on the tape. `params` are the tape variables matching
/// NetworkParams::tensors. Returns the disparity pyramid, finest scale first.
inline std::vector<Var> forward(const NetworkConfig& cfg, const std::vector<Var>& params, Var image) {
  const Tensor& im = image.value();
  require_rank4(im, "forward");
  if (im.channels() != cfg.input_channels) {
    throw ShapeError("forward: network expects " + std::to_string(cfg.input_channels) + " channels, image has " +
                     std::to_string(im.channels()));
  }
  const std::size_t D = cfg.encoder_depth;
  const std::size_t factor = std::size_t{1} << D;
  if (im.height() % factor != 0 || im.width() % factor != 0) {
    throw ShapeError("forward: extents " + to_string(im.shape()) + " must be divisible by " + std::to_string(factor));
  }
  const auto layers = layer_table(cfg);
  if (params.size() != 2 * layers.size()) throw ShapeError("forward: parameter list does not match the architecture");

  std::size_t li = 0;
  auto conv = [&](Var x) {
    const LayerSpec& l = layers[li];
    Var y = bias_add(conv2d(x, params[2 * li], l.stride, l.padding), params[2 * li + 1]);
    ++li;
    return y;
  };

  std::vector<Var> skips{image};
  Var x = image;
  for (std::size_t k = 1; k <= D; ++k) {
    x = elu(conv(x));
    x = elu(conv(x));
    skips.push_back(x);
  }
  std::vector<Var> pyramid(kOutputScales);
  bool have_coarser = false;
  Var coarser{};
  for (std::size_t lvl = D; lvl-- > 0;) {
    std::vector<Var> parts{upsample2(x), skips[lvl]};
    if (have_coarser) parts.push_back(upsample2(coarser));
    x = elu(conv(concat_channels(parts)));
    if (lvl < kOutputScales) {
      const Var disp = scale(sigmoid(conv(x)), cfg.d_max_frac);
      pyramid[lvl] = disp;
      coarser = disp;
      have_coarser = true;
    }
  }
  return pyramid;
}

inline std::vector<Var> add_params(Tape& tape, const NetworkParams& p, bool requires_grad = true) {
  std::vector<Var> vars;
  vars.reserve(p.tensors.size());
  for (const auto& t : p.tensors) vars.push_back(tape.leaf(t, requires_grad));
  return vars;
}

/// Inference-only convenience wrapper.
inline std::vector<Tensor> forward(const NetworkParams& p, const Tensor& image) {
  Tape tape;
  const auto vars = add_params(tape, p, false);
  const auto pyr = forward(p.config, vars, tape.constant(image));
  std::vector<Tensor> out;
  for (const Var& v : pyr) out.push_back(v.value());
  return out;
}

enum class View { left, right };

/// CNN-L and CNN-R. They share a config but have independently initialised parameters.
///
/// Two-channel (DNM12) layout: CNN-L emits (d_ll, d_lr), CNN-R emits (d_rr, d_rl),
/// so channel 0 is always the disparity of the network's own input view.
struct DualModel {
  ModelKind kind = ModelKind::dnm6;
  NetworkParams left;
  NetworkParams right;

  const NetworkConfig& config() const { return left.config; }
  bool operator==(const DualModel&) const = default;
};

inline NetworkConfig config_for(ModelKind kind, NetworkConfig cfg) {
  cfg.out_channels = kind == ModelKind::dnm6 ? 1 : 2;
  return cfg;
}

inline DualModel make_dual_model(ModelKind kind, NetworkConfig cfg) {
  cfg = config_for(kind, cfg);
  DualModel m;
  m.kind = kind;
  m.left = init_params(cfg);
  NetworkConfig rcfg = cfg;
  rcfg.seed = cfg.seed ^ 0x9E3779B97F4A7C15ull;
  m.right = init_params(rcfg);
  m.right.config = cfg;
  return m;
}

/// Full-resolution disparity (width fractions, [b,1,h,w]) from one network.
inline Tensor predict_disparity(const DualModel& model, const Tensor& image, View view, std::size_t channel = 0) {
  const NetworkParams& p = view == View::left ? model.left : model.right;
  if (channel >= p.config.out_channels) throw ConfigError("predict_disparity: channel out of range");
  auto pyr = forward(p, image);
  if (p.config.out_channels == 1) return std::move(pyr[0]);
  return slice_channels(pyr[0], channel, 1);
}

// --- checkpoint file -------------------------------------------------------
//
//   "DNMC" | u32 version | u32 kind (6 or 12)
//   u32 input_channels | u32 base_filters | u32 encoder_depth | u32 out_channels
//   f64 d_max_frac | u64 seed | u32 tensor_count
//   tensor_count x ( u32 name_len | name | u32 rank | rank x u64 extent | f64 values )
//
// Integers and floats are little-endian. CNN-L tensors come first, prefixed "L/", then CNN-R's ("R/").

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string context) : data_(data), context_(std::move(context)) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError(FormatError::Kind::truncated, context_ + ": unexpected end of data");
  }

  const std::string& data_;
  std::string context_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::io, "write failed for " + path);
}

}  // namespace detail

inline std::string encode_checkpoint(const DualModel& m) {
  std::string out = "DNMC";
  const NetworkConfig& c = m.config();
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.kind));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.input_channels));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.base_filters));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.encoder_depth));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.out_channels));
  detail::put_le<double>(out, c.d_max_frac);
  detail::put_le<std::uint64_t>(out, c.seed);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.left.tensors.size() + m.right.tensors.size()));
  for (const auto* net : {&m.left, &m.right}) {
    const std::string prefix = net == &m.left ? "L/" : "R/";
    for (std::size_t i = 0; i < net->tensors.size(); ++i) {
      const std::string name = prefix + net->names[i];
      const Tensor& t = net->tensors[i];
      detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out += name;
      detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t e : t.shape()) detail::put_le<std::uint64_t>(out, e);
      for (double v : t.values()) detail::put_le<double>(out, v);
    }
  }
  return out;
}

inline DualModel decode_checkpoint(const std::string& bytes, const std::string& context = "checkpoint") {
  if (bytes.size() < 4 || bytes.compare(0, 4, "DNMC") != 0) {
    throw FormatError(FormatError::Kind::bad_magic, context + ": missing DNMC magic");
  }
  detail::ByteReader r(bytes, context);
  r.bytes(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::unsupported_version, context + ": unsupported version " + std::to_string(version));
  }
  const auto kind_raw = r.get<std::uint32_t>();
  if (kind_raw != 6 && kind_raw != 12) throw FormatError(FormatError::Kind::malformed_header, context + ": bad model kind");
  NetworkConfig c;
  c.input_channels = r.get<std::uint32_t>();
  c.base_filters = r.get<std::uint32_t>();
  c.encoder_depth = r.get<std::uint32_t>();
  c.out_channels = r.get<std::uint32_t>();
  c.d_max_frac = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(FormatError::Kind::malformed_header, context + ": " + e.what());
  }
  const auto kind = static_cast<ModelKind>(kind_raw);
  if (config_for(kind, c).out_channels != c.out_channels) {
    throw FormatError(FormatError::Kind::malformed_header, context + ": out_channels inconsistent with model kind");
  }

  // Start from the architecture's layout and fill values in, checking names and shapes.
  DualModel m;
  m.kind = kind;
  m.left = init_params(c);
  m.right = m.left;
  const auto count = r.get<std::uint32_t>();
  if (count != m.left.tensors.size() + m.right.tensors.size()) {
    throw FormatError(FormatError::Kind::malformed_header, context + ": tensor count does not match the architecture");
  }
  for (auto* net : {&m.left, &m.right}) {
    const std::string prefix = net == &m.left ? "L/" : "R/";
    for (std::size_t i = 0; i < net->tensors.size(); ++i) {
      const auto name_len = r.get<std::uint32_t>();
      const std::string name = r.bytes(name_len);
      if (name != prefix + net->names[i]) {
        throw FormatError(FormatError::Kind::malformed_header,
                          context + ": expected tensor " + prefix + net->names[i] + ", found " + name);
      }
      const auto rank = r.get<std::uint32_t>();
      if (rank != net->tensors[i].rank()) throw FormatError(FormatError::Kind::malformed_header, context + ": rank mismatch for " + name);
      Shape shape(rank);
      for (auto& e : shape) e = r.get<std::uint64_t>();
      Tensor& t = net->tensors[i];
      if (shape != t.shape()) throw FormatError(FormatError::Kind::malformed_header, context + ": shape mismatch for " + name);
      for (double& v : t.values()) v = r.get<double>();
    }
  }
  if (!r.at_end()) throw FormatError(FormatError::Kind::trailing_data, context + ": trailing bytes after last tensor");
  return m;
}

inline void save_checkpoint(const DualModel& m, const std::string& path) { detail::write_file(path, encode_checkpoint(m)); }

inline DualModel load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path), path); }

}  // namespace dnm

#endif  // DNM_DUALNET_HPP
