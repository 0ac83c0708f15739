#pragma once

#include <deque>
#include <string>
#include <string_view>

#include "siddm/tensor.hpp"

namespace siddm {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered, named parameter collection. References returned by add()/at()
/// stay valid as more entries are added.
class ParamSet {
 public:
  Tensor& add(std::string name, Tensor tensor);
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t num_values() const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  /// Throws unless names and shapes agree entry by entry.
  void check_compatible(const ParamSet& other, const char* context) const;

 private:
  std::deque<NamedTensor> entries_;
};

}  // namespace siddm
