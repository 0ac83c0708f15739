#pragma once

#include <functional>
#include <vector>

#include <doctest.h>

#include "siddm/autodiff.hpp"
#include "siddm/error.hpp"
#include "siddm/networks.hpp"
#include "siddm/rng.hpp"
#include "siddm/tensor.hpp"

namespace testing {

/// Kind of the siddm::Error thrown by f; fails the test when nothing throws.
template <typename F>
siddm::ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const siddm::Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return siddm::ErrorKind::InvalidArgument;
}

inline siddm::Tensor random_tensor(siddm::Shape shape, siddm::Rng& rng,
                                   double scale = 1.0) {
  siddm::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

inline siddm::DenoiserArch small_denoiser(int steps, std::size_t latent = 2) {
  siddm::DenoiserArch a;
  a.latent_dim = latent;
  a.embed_dim = 4;
  a.hidden = {8, 8};
  a.steps = steps;
  return a;
}

inline siddm::CriticArch small_critic(int steps,
                                      siddm::CriticMode mode = siddm::CriticMode::Marginal) {
  siddm::CriticArch a;
  a.embed_dim = 4;
  a.hidden = {8, 8};
  a.steps = steps;
  a.mode = mode;
  return a;
}

/// Random heads so every output depends on every trunk parameter.
inline siddm::InitOptions random_heads() {
  siddm::InitOptions o;
  o.zero_output_heads = false;
  return o;
}

inline std::vector<siddm::Tensor*> tensors_of(siddm::ParamSet& params) {
  std::vector<siddm::Tensor*> out;
  for (auto& e : params) out.push_back(&e.tensor);
  return out;
}

inline bool all_zero(const std::vector<double>& v) {
  for (double x : v) {
    if (x != 0.0) return false;
  }
  return true;
}

}  // namespace testing
