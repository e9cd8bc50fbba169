#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace xcos {

namespace detail {
[[noreturn]] void fail(const std::string& message);
void check(bool condition, const std::string& message);
std::string shape_string(const std::vector<int>& shape);
}  // namespace detail

// Dense row-major tensor of 64-bit reals. Rank 0 (empty shape) is a scalar.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> entries);

  static Tensor scalar(double value);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const;
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty() && shape_.empty(); }
  bool is_scalar() const { return size() == 1; }
  double scalar_value() const;

  double* data() { return entries_.data(); }
  const double* data() const { return entries_.data(); }
  double& operator[](int i) { return entries_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return entries_[static_cast<size_t>(i)]; }

  // Row-major multi-index access, rank checked.
  double& at(std::initializer_list<int> index) { return entries_[offset(index)]; }
  double at(std::initializer_list<int> index) const { return entries_[offset(index)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  Tensor reshaped(std::vector<int> new_shape) const;
  Tensor flattened() const { return reshaped({size()}); }

  void fill(double value);
  void zero() { fill(0.0); }
  bool all_finite() const;
  std::string shape_str() const { return detail::shape_string(shape_); }

  const std::vector<double>& entries() const { return entries_; }

 private:
  size_t offset(std::initializer_list<int> index) const;

  std::vector<int> shape_;
  std::vector<double> entries_;
};

// Trainable tensor: value plus an additively accumulated gradient of the
// same shape.
struct Parameter {
  Tensor value;
  Tensor gradient;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), gradient(Tensor::zeros_like(value)) {}
};

}  // namespace xcos
