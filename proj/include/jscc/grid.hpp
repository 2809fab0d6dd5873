#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace jscc {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient slot.
///
/// Complex data is carried as interleaved (real, imag) pairs in a trailing
/// axis of extent 2. A rank-0 grid holds a single scalar.
class RealGrid {
 public:
  RealGrid() = default;
  explicit RealGrid(Shape shape, double fill = 0.0);
  RealGrid(Shape shape, std::vector<double> values);

  static RealGrid scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Value of a single-element grid.
  double item() const;

  bool has_grad() const noexcept { return grad_enabled_; }
  void enable_grad();
  void drop_grad() noexcept {
    grad_.clear();
    grad_enabled_ = false;
  }
  std::span<double> grad() noexcept { return grad_; }
  std::span<const double> grad() const noexcept { return grad_; }

  /// Reinterprets the extents; the element count must not change.
  void reshape(Shape shape);

  bool all_finite() const noexcept;

  friend bool operator==(const RealGrid& a, const RealGrid& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_{};
  std::vector<double> values_ = std::vector<double>(1, 0.0);
  std::vector<double> grad_;
  bool grad_enabled_ = false;
};

}  // namespace jscc
