#include "jscc/grid.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace jscc {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

RealGrid::RealGrid(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

RealGrid::RealGrid(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw std::invalid_argument("RealGrid: " + std::to_string(values_.size()) +
                                " values do not fill shape " + to_string(shape_));
  }
}

RealGrid RealGrid::scalar(double value) { return RealGrid(Shape{}, std::vector<double>{value}); }

std::size_t RealGrid::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw std::out_of_range("RealGrid: axis " + std::to_string(axis) + " out of range for " +
                            to_string(shape_));
  }
  return shape_[axis];
}

double RealGrid::item() const {
  if (values_.size() != 1) {
    throw std::logic_error("RealGrid::item on grid of shape " + to_string(shape_));
  }
  return values_[0];
}

void RealGrid::enable_grad() {
  if (!grad_enabled_ || grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
  grad_enabled_ = true;
}

void RealGrid::reshape(Shape shape) {
  if (element_count(shape) != values_.size()) {
    throw std::invalid_argument("RealGrid: cannot reshape " + to_string(shape_) + " to " +
                                to_string(shape));
  }
  shape_ = std::move(shape);
}

bool RealGrid::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace jscc
