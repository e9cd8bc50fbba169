#include "xcos/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace xcos {

namespace detail {

void fail(const std::string& message) { throw std::invalid_argument(message); }

void check(bool condition, const std::string& message) {
  if (!condition) fail(message);
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream out;
  out << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

namespace {
size_t checked_product(const std::vector<int>& shape) {
  size_t n = 1;
  for (int e : shape) {
    check(e > 0, "tensor extents must be positive, got shape " + shape_string(shape));
    n *= static_cast<size_t>(e);
  }
  return n;
}
}  // namespace

}  // namespace detail

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), entries_(detail::checked_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> entries)
    : shape_(std::move(shape)), entries_(std::move(entries)) {
  const size_t expected = detail::checked_product(shape_);
  detail::check(entries_.size() == expected,
                "entry count " + std::to_string(entries_.size()) + " does not match shape " +
                    detail::shape_string(shape_));
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.entries_.assign(1, value);
  return t;
}

int Tensor::extent(int axis) const {
  detail::check(axis >= 0 && axis < rank(), "axis " + std::to_string(axis) +
                                                " out of range for shape " + shape_str());
  return shape_[static_cast<size_t>(axis)];
}

double Tensor::scalar_value() const {
  detail::check(is_scalar(), "expected a scalar tensor, got shape " + shape_str());
  return entries_[0];
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
  Tensor out(std::move(new_shape), entries_);
  return out;
}

void Tensor::fill(double value) { std::fill(entries_.begin(), entries_.end(), value); }

bool Tensor::all_finite() const {
  for (double v : entries_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

size_t Tensor::offset(std::initializer_list<int> index) const {
  detail::check(static_cast<int>(index.size()) == rank(),
                "index rank " + std::to_string(index.size()) + " does not match tensor shape " +
                    shape_str());
  size_t off = 0;
  int axis = 0;
  for (int i : index) {
    const int e = shape_[static_cast<size_t>(axis)];
    detail::check(i >= 0 && i < e, "index " + std::to_string(i) + " out of bounds on axis " +
                                       std::to_string(axis) + " of shape " + shape_str());
    off = off * static_cast<size_t>(e) + static_cast<size_t>(i);
    ++axis;
  }
  return off;
}

}  // namespace xcos
