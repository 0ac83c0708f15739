#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace siddm {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major f64 array with an optional gradient buffer.
///
/// An empty shape is a scalar. Two-dimensional tensors are (rows, cols); the
/// helpers rows()/cols() are only meaningful for rank 2.
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, {value}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor(Shape{rows, cols}, fill);
  }
  static Tensor from_rows(
      std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool value) { requires_grad_ = value; }

  bool has_grad() const { return !grad_.empty(); }
  /// Gradient buffer, allocated as zeros on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const { return grad_; }
  void zero_grad();

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

/// Throws a shape error naming both shapes unless they match.
void check_same_shape(const Shape& a, const Shape& b, const char* context);

}  // namespace siddm
