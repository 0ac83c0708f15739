#include <doctest.h>

#include <cmath>
#include <numeric>
#include <string>

#include "helpers.hpp"
#include "siddm/adam.hpp"
#include "siddm/autodiff.hpp"
#include "siddm/error.hpp"
#include "siddm/grad_check.hpp"
#include "siddm/params.hpp"
#include "siddm/rng.hpp"
#include "siddm/tensor.hpp"

using namespace siddm;
using testing::kind_of;
using testing::random_tensor;

namespace {

constexpr double kStep = 1e-4;
constexpr double kTol = 1e-5;
constexpr int kTrials = 100;

/// Reduces a tensor-valued op to a scalar through a fixed random functional.
Var project(Graph& g, Var out, const Tensor& weights) {
  return sum(out * g.constant(weights));
}

struct OpCase {
  const char* name;
  /// Builds inputs for one trial; returns the op applied to params.
  std::function<std::vector<Tensor>(Rng&)> inputs;
  std::function<Var(Graph&, std::vector<Var>&)> apply;
};

std::size_t dim(Rng& rng) { return static_cast<std::size_t>(rng.uniform_int(1, 5)); }

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  cases.push_back({"matmul",
                   [](Rng& r) {
                     auto n = dim(r), k = dim(r), m = dim(r);
                     return std::vector{random_tensor({n, k}, r), random_tensor({k, m}, r)};
                   },
                   [](Graph&, std::vector<Var>& v) { return matmul(v[0], v[1]); }});
  auto pair = [](Rng& r) {
    auto n = dim(r), m = dim(r);
    return std::vector{random_tensor({n, m}, r), random_tensor({n, m}, r)};
  };
  auto single = [](double scale) {
    return [scale](Rng& r) {
      auto n = dim(r), m = dim(r);
      return std::vector{random_tensor({n, m}, r, scale)};
    };
  };
  cases.push_back({"add", pair, [](Graph&, std::vector<Var>& v) { return v[0] + v[1]; }});
  cases.push_back({"sub", pair, [](Graph&, std::vector<Var>& v) { return v[0] - v[1]; }});
  cases.push_back({"mul", pair, [](Graph&, std::vector<Var>& v) { return v[0] * v[1]; }});
  cases.push_back({"scale", single(1.0),
                   [](Graph&, std::vector<Var>& v) { return scale(v[0], -1.7); }});
  cases.push_back({"add_row",
                   [](Rng& r) {
                     auto n = dim(r), m = dim(r);
                     return std::vector{random_tensor({n, m}, r), random_tensor({1, m}, r)};
                   },
                   [](Graph&, std::vector<Var>& v) { return add_row(v[0], v[1]); }});
  cases.push_back({"leaky_relu", single(1.0),
                   [](Graph&, std::vector<Var>& v) { return leaky_relu(v[0], 0.2); }});
  cases.push_back({"sigmoid", single(3.0),
                   [](Graph&, std::vector<Var>& v) { return sigmoid(v[0]); }});
  cases.push_back({"log",
                   [](Rng& r) {
                     auto n = dim(r), m = dim(r);
                     Tensor t = random_tensor({n, m}, r);
                     for (auto& x : t.values()) x = std::abs(x) + 0.2;
                     return std::vector{t};
                   },
                   [](Graph&, std::vector<Var>& v) { return log(v[0]); }});
  // Wider inputs push the gradient below what central differences resolve
  // against the roundoff of the projected sum.
  cases.push_back({"log_sigmoid", single(3.0),
                   [](Graph&, std::vector<Var>& v) { return log_sigmoid(v[0]); }});
  cases.push_back({"sum", single(1.0),
                   [](Graph&, std::vector<Var>& v) { return sum(v[0]); }});
  cases.push_back({"mean", single(1.0),
                   [](Graph&, std::vector<Var>& v) { return mean(v[0]); }});
  cases.push_back({"row_sq_norm", single(1.0),
                   [](Graph&, std::vector<Var>& v) { return row_sq_norm(v[0]); }});
  cases.push_back({"concat_cols",
                   [](Rng& r) {
                     auto n = dim(r);
                     return std::vector{random_tensor({n, dim(r)}, r),
                                        random_tensor({n, dim(r)}, r)};
                   },
                   [](Graph&, std::vector<Var>& v) { return concat_cols({v[0], v[1]}); }});
  return cases;
}

}  // namespace

TEST_CASE("tensor construction and shape errors") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t(1, 2) == 1.5);
  CHECK(Tensor().rank() == 0);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK(kind_of([] { Tensor({2, 2}, std::vector<double>{1, 2, 3}); }) == ErrorKind::Shape);
  CHECK(kind_of([] { Tensor::from_rows({{1, 2}, {3}}); }) == ErrorKind::Shape);
  CHECK(kind_of([] { (void)Tensor({2, 2}).item(); }) == ErrorKind::Shape);
  Tensor r = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(r(1, 0) == 3.0);
  CHECK(r.all_finite());
  r(0, 0) = std::nan("");
  CHECK_FALSE(r.all_finite());
}

TEST_CASE("rng matches reference xoshiro256** and splitmix64 streams") {
  Rng::State s;
  s.s = {1, 2, 3, 4};
  Rng r(s);
  CHECK(r.next_u64() == 11520ULL);
  CHECK(r.next_u64() == 0ULL);
  CHECK(r.next_u64() == 1509978240ULL);
  CHECK(r.next_u64() == 1215971899390074240ULL);

  std::uint64_t x = 0;
  CHECK(splitmix64(x) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(x) == 0x6e789e6aa1b965f4ULL);

  Rng seeded(42);
  CHECK(seeded.next_u64() == 1546998764402558742ULL);
  CHECK(seeded.next_u64() == 6990951692964543102ULL);
  CHECK(seeded.next_u64() == 12544586762248559009ULL);
}

TEST_CASE("rng distributions, state and forks") {
  Rng r(7);
  double mean = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    mean += z;
    sq += z * z;
  }
  mean /= n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);

  std::vector<int> counts(4, 0);
  for (int i = 0; i < 40000; ++i) {
    const auto k = r.uniform_int(3, 6);
    REQUIRE(k >= 3);
    REQUIRE(k <= 6);
    ++counts[k - 3];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  CHECK(kind_of([&] { r.uniform_int(2, 1); }) == ErrorKind::InvalidArgument);

  // The cached Box-Muller partner is part of the state.
  Rng a(11);
  a.normal();
  const Rng::State saved = a.state();
  CHECK(saved.has_spare);
  const double n1 = a.normal(), n2 = a.normal();
  Rng b(saved);
  CHECK(b.normal() == n1);
  CHECK(b.normal() == n2);

  Rng root(5);
  const Rng::State before = root.state();
  Rng f1 = root.fork(1), f1b = root.fork(1), f2 = root.fork(2);
  CHECK(root.state() == before);
  const auto v1 = f1.next_u64();
  CHECK(v1 == f1b.next_u64());
  CHECK(v1 != f2.next_u64());
  CHECK(Rng(5).fork(1).next_u64() != Rng(6).fork(1).next_u64());
}

TEST_CASE("forward values of ops") {
  Graph g;
  Var a = g.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  Var b = g.constant(Tensor::from_rows({{5, 6}, {7, 8}}));
  const Tensor& p = matmul(a, b).value();
  CHECK(p(0, 0) == 19);
  CHECK(p(0, 1) == 22);
  CHECK(p(1, 0) == 43);
  CHECK(p(1, 1) == 50);
  CHECK(add_row(a, g.constant(Tensor::from_rows({{10, 20}}))).value()(1, 1) == 24);
  CHECK(row_sq_norm(a).value()(1, 0) == 25);
  CHECK(mean(a).value().item() == 2.5);
  CHECK(sum(a).value().item() == 10);
  const Tensor& c = concat_cols({a, b}).value();
  CHECK(c.cols() == 4);
  CHECK(c(1, 2) == 7);
  CHECK(leaky_relu(g.constant(Tensor::from_rows({{-2, 3}})), 0.2).value()(0, 0) ==
        doctest::Approx(-0.4));

  Var x = g.constant(Tensor::from_rows({{-800, -3, 0, 3, 800}}));
  const Tensor& ls = log_sigmoid(x).value();
  CHECK(ls[0] == -800.0);
  CHECK(ls[1] == doctest::Approx(std::log(1.0 / (1.0 + std::exp(3.0)))).epsilon(1e-14));
  CHECK(ls[2] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(ls[3] == doctest::Approx(std::log(1.0 / (1.0 + std::exp(-3.0)))).epsilon(1e-14));
  CHECK(ls[4] == 0.0);
  const Tensor& sg = sigmoid(x).value();
  CHECK(sg[0] == 0.0);
  CHECK(sg[2] == 0.5);
  CHECK(sg[4] == 1.0);
}

TEST_CASE("shape errors name the op") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({2, 3}));
  CHECK(kind_of([&] { matmul(a, b); }) == ErrorKind::Shape);
  CHECK(kind_of([&] { add(a, g.constant(Tensor({3, 2}))); }) == ErrorKind::Shape);
  CHECK(kind_of([&] { add_row(a, g.constant(Tensor({1, 2}))); }) == ErrorKind::Shape);
  CHECK(kind_of([&] { concat_cols({a, g.constant(Tensor({3, 1}))}); }) == ErrorKind::Shape);
  CHECK(kind_of([&] { g.backward(a); }) == ErrorKind::Shape);
  try {
    matmul(a, b);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
}

TEST_CASE("non-finite values are errors naming the op") {
  Graph g;
  Var neg = g.constant(Tensor::from_rows({{1.0, -1.0}}));
  try {
    log(neg);
    FAIL("log of a negative value must fail");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
  Var big = g.constant(Tensor::from_rows({{1e300}}));
  CHECK(kind_of([&] { mul(big, big); }) == ErrorKind::NonFinite);
}

TEST_CASE("every op passes randomized gradient checks") {
  for (const auto& c : op_cases()) {
    SUBCASE(c.name) {
      Rng rng(std::hash<std::string>{}(c.name));
      int done = 0;
      double worst = 0.0;
      while (done < kTrials) {
        std::vector<Tensor> inputs = c.inputs(rng);
        Tensor weights;
        {
          Graph g;
          std::vector<Var> vars;
          for (auto& t : inputs) vars.push_back(g.constant(t));
          Var out = c.apply(g, vars);
          // Keep finite differences away from the rectifier kink.
          if (g.min_kink_margin() < 1e-3) continue;
          weights = random_tensor(out.shape(), rng);
        }
        auto f = [&](Graph& g) {
          std::vector<Var> vars;
          for (auto& t : inputs) vars.push_back(g.param(t));
          Var out = c.apply(g, vars);
          return out.shape().empty() ? out : project(g, out, weights);
        };
        std::vector<Tensor*> points;
        for (auto& t : inputs) points.push_back(&t);
        const GradCheckReport r = grad_check(f, points, kStep, kTol);
        worst = std::max(worst, r.max_rel_err);
        ++done;
      }
      INFO("op " << c.name << " worst relative error " << worst);
      CHECK(worst <= kTol);
    }
  }
}

TEST_CASE("stop_gradient cuts the path") {
  Tensor x = Tensor::from_rows({{1.0, -2.0, 3.0}});
  Graph g;
  Var v = g.param(x);
  g.backward(sum(stop_gradient(v) * v));
  CHECK(x.grad() == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("param and frozen binding semantics") {
  Tensor w = Tensor::from_rows({{1.0, 2.0}});
  Tensor unused = Tensor::from_rows({{5.0}});
  Tensor frozen = Tensor::from_rows({{3.0, 4.0}});
  frozen.grad() = {9.0, 9.0};
  unused.grad() = {7.0};
  {
    Graph g;
    Var a = g.param(w);
    Var a2 = g.param(w);
    CHECK(a.id() == a2.id());
    g.param(unused);
    Var f = g.frozen(frozen);
    g.backward(sum(a * a + a * f));
    CHECK(w.grad() == std::vector<double>{2.0 + 3.0, 4.0 + 4.0});
    CHECK(unused.grad() == std::vector<double>{0.0});
    CHECK(frozen.grad() == std::vector<double>{0.0, 0.0});
    CHECK(kind_of([&] { g.frozen(w); }) == ErrorKind::InvalidArgument);
  }
  // Gradients are overwritten, not accumulated, across graphs.
  Graph g2;
  g2.backward(sum(g2.param(w)));
  CHECK(w.grad() == std::vector<double>{1.0, 1.0});
}

TEST_CASE("grad_check rejects a wrong backward") {
  Rng rng(3);
  Tensor x = random_tensor({3, 2}, rng);
  auto build = [&](bool correct) {
    return [&x, correct](Graph& g) {
      Var in = g.param(x);
      Tensor out = in.value();
      for (auto& v : out.values()) v *= 2.0;
      const double sign = correct ? 1.0 : -1.0;
      Var y = g.custom({in}, out,
                       [sign](std::span<const double> go, std::span<std::span<double>> gi) {
                         for (std::size_t i = 0; i < go.size(); ++i) {
                           gi[0][i] += sign * 2.0 * go[i];
                         }
                       });
      return sum(y * y);
    };
  };
  std::vector<Tensor*> points{&x};
  CHECK(grad_check(build(true), points, kStep, kTol).pass);
  const auto bad = grad_check(build(false), points, kStep, kTol);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_rel_err > 1.0);
}

TEST_CASE("param sets") {
  ParamSet p;
  p.add("a", Tensor({2, 2}, 1.0));
  p.add("b", Tensor({3}, 0.0));
  CHECK(p.size() == 2);
  CHECK(p.num_values() == 7);
  CHECK(p.contains("a"));
  CHECK(kind_of([&] { p.add("a", Tensor({1})); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { p.at("zzz"); }) == ErrorKind::InvalidArgument);
  ParamSet q;
  q.add("a", Tensor({2, 2}));
  q.add("b", Tensor({4}));
  CHECK(kind_of([&] { p.check_compatible(q, "test"); }) == ErrorKind::Shape);
}

TEST_CASE("adam matches a hand-computed update") {
  ParamSet p;
  p.add("w", Tensor::from_rows({{1.0, -1.0}}));
  AdamState state;
  state.config = {0.5, 0.9, 1e-8};
  const double lr = 0.1;
  const std::vector<std::vector<double>> grads{{0.5, -2.0}, {0.1, 1.0}};

  std::vector<double> w{1.0, -1.0}, m{0, 0}, v{0, 0};
  for (int step = 1; step <= 2; ++step) {
    p.at("w").grad() = grads[step - 1];
    adam_step(p, state, lr);
    for (int i = 0; i < 2; ++i) {
      const double g = grads[step - 1][i];
      m[i] = 0.5 * m[i] + 0.5 * g;
      v[i] = 0.9 * v[i] + 0.1 * g * g;
      const double mh = m[i] / (1.0 - std::pow(0.5, step));
      const double vh = v[i] / (1.0 - std::pow(0.9, step));
      w[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p.at("w")[i] == doctest::Approx(w[i]).epsilon(1e-14));
    }
  }
  CHECK(state.step == 2);
  CHECK(kind_of([&] { adam_step(p, state, 0.0); }) == ErrorKind::InvalidArgument);
}
