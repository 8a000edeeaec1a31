#ifndef DNM_TENSOR_HPP
#define DNM_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dnm/error.hpp"

namespace dnm {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array of doubles. Images use (batch, channel, height, width).
/// A rank-0 tensor holds a single scalar.
class Tensor {
 public:
  Tensor() : shape_{}, values_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != element_count(shape_)) {
      throw ShapeError("tensor: " + std::to_string(values_.size()) + " values do not fill shape " +
                       dnm::to_string(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor image(std::size_t b, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0) {
    return Tensor(Shape{b, c, h, w}, fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double item() const {
    if (values_.size() != 1) throw ShapeError("item(): tensor of shape " + dnm::to_string(shape_) + " is not a scalar");
    return values_[0];
  }

  // 4-D accessors (b, c, y, x).
  std::size_t index(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }
  double& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) noexcept { return values_[index(b, c, y, x)]; }
  double at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return values_[index(b, c, y, x)];
  }

  std::size_t batch() const { return dim(0); }
  std::size_t channels() const { return dim(1); }
  std::size_t height() const { return dim(2); }
  std::size_t width() const { return dim(3); }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

inline void require_rank4(const Tensor& t, const char* op) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected a 4-D (b,c,h,w) tensor, got " + to_string(t.shape()));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

/// Mirror every row (x -> w-1-x).
inline Tensor flip_horizontal(const Tensor& t) {
  require_rank4(t, "flip_horizontal");
  Tensor out(t.shape());
  const std::size_t w = t.width();
  const std::size_t rows = t.size() / w;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 0; x < w; ++x) out[r * w + x] = t[r * w + (w - 1 - x)];
  }
  return out;
}

/// Copy of channels [first, first+count).
inline Tensor slice_channels(const Tensor& t, std::size_t first, std::size_t count) {
  require_rank4(t, "slice_channels");
  if (count == 0 || first + count > t.channels()) throw ShapeError("slice_channels: channel range out of bounds");
  Tensor out(Shape{t.batch(), count, t.height(), t.width()});
  const std::size_t plane = t.height() * t.width();
  for (std::size_t b = 0; b < t.batch(); ++b) {
    for (std::size_t c = 0; c < count; ++c) {
      const double* src = t.values().data() + t.index(b, first + c, 0, 0);
      double* dst = out.values().data() + out.index(b, c, 0, 0);
      std::copy(src, src + plane, dst);
    }
  }
  return out;
}

/// Concatenate along the batch axis; all parts must share (c, h, w).
inline Tensor stack_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack_batch: no tensors");
  Shape shape = parts[0].shape();
  if (shape.size() != 4) throw ShapeError("stack_batch: expected 4-D tensors");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 4 || p.channels() != shape[1] || p.height() != shape[2] || p.width() != shape[3]) {
      throw ShapeError("stack_batch: inconsistent shapes " + to_string(shape) + " vs " + to_string(p.shape()));
    }
    total += p.batch();
  }
  shape[0] = total;
  std::vector<double> values;
  values.reserve(element_count(shape));
  for (const auto& p : parts) values.insert(values.end(), p.values().begin(), p.values().end());
  return Tensor(shape, std::move(values));
}

}  // namespace dnm

#endif  // DNM_TENSOR_HPP
