#include "siddm/params.hpp"

#include "siddm/error.hpp"

namespace siddm {

Tensor& ParamSet::add(std::string name, Tensor tensor) {
  if (contains(name)) {
    fail(ErrorKind::InvalidArgument, "duplicate parameter '" + name + "'");
  }
  entries_.push_back({std::move(name), std::move(tensor)});
  return entries_.back().tensor;
}

Tensor& ParamSet::at(std::string_view name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  fail(ErrorKind::InvalidArgument,
       "unknown parameter '" + std::string(name) + "'");
}

const Tensor& ParamSet::at(std::string_view name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParamSet::check_compatible(const ParamSet& other,
                                const char* context) const {
  if (other.size() != size()) {
    fail(ErrorKind::Shape, std::string(context) + ": expected " +
                               std::to_string(size()) + " tensors, got " +
                               std::to_string(other.size()));
  }
  auto it = other.begin();
  for (const auto& e : entries_) {
    if (it->name != e.name) {
      fail(ErrorKind::Shape, std::string(context) + ": expected tensor '" +
                                 e.name + "', got '" + it->name + "'");
    }
    if (it->tensor.shape() != e.tensor.shape()) {
      fail(ErrorKind::Shape, std::string(context) + ": tensor '" + e.name +
                                 "' has shape " +
                                 shape_string(it->tensor.shape()) +
                                 ", expected " + shape_string(e.tensor.shape()));
    }
    ++it;
  }
}

}  // namespace siddm
