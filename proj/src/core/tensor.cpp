#include "siddm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "siddm/error.hpp"

namespace siddm {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    fail(ErrorKind::Shape, "tensor: shape " + shape_string(shape_) +
                               " does not hold " +
                               std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(n * m);
  for (const auto& row : rows) {
    if (row.size() != m) fail(ErrorKind::Shape, "from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{n, m}, std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1) {
    fail(ErrorKind::Shape,
         "item: tensor of shape " + shape_string(shape_) + " is not a scalar");
  }
  return data_[0];
}

std::vector<double>& Tensor::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void check_same_shape(const Shape& a, const Shape& b, const char* context) {
  if (a != b) {
    fail(ErrorKind::Shape, std::string(context) + ": shapes " +
                               shape_string(a) + " and " + shape_string(b) +
                               " differ");
  }
}

}  // namespace siddm
