#pragma once

#include <array>
#include <cstdint>

namespace siddm {

/// xoshiro256** stream with Box-Muller normals.
///
/// Seeding expands the 64-bit seed with splitmix64. Uniforms take the top 53
/// bits of a draw. Normals are produced in pairs; the sine branch is cached
/// and returned by the following call, so the cache is part of the state.
class Rng {
 public:
  struct State {
    std::array<std::uint64_t, 4> s{};
    bool has_spare = false;
    double spare = 0.0;

    bool operator==(const State&) const = default;
  };

  explicit Rng(std::uint64_t seed = 0);
  explicit Rng(const State& state) : state_(state) {}

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [lo, hi], by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Independent stream for a sub-task, derived without advancing this one.
  Rng fork(std::uint64_t stream) const;

  const State& state() const { return state_; }

 private:
  State state_;
};

std::uint64_t splitmix64(std::uint64_t& x);

}  // namespace siddm
