#include "lmseg/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "lmseg/errors.hpp"

namespace lmseg {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape has no extents");
  for (auto e : shape)
    if (e == 0) throw DimensionError("zero extent in shape " + shape_string(shape));
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), values_(element_count(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (element_count(shape_) != values_.size())
    throw DimensionError("shape " + shape_string(shape_) + " holds " +
                         std::to_string(element_count(shape_)) +
                         " values, got " + std::to_string(values_.size()));
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

std::size_t Tensor::rows() const {
  return shape_.size() >= 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
  return shape_.empty() ? 0 : shape_.back();
}

void Tensor::fill(double value) {
  std::fill(values_.begin(), values_.end(), value);
}

void Tensor::add(const Tensor& other) {
  if (other.shape_ != shape_)
    throw DimensionError("cannot add " + shape_string(other.shape_) + " into " +
                         shape_string(shape_));
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace lmseg
