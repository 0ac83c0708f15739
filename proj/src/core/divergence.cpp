#include "siddm/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <thread>

#include "siddm/error.hpp"

namespace siddm {

namespace {

constexpr double kSumTol = 1e-12;
constexpr double kSlackTol = 1e-12;

void check_same_support(std::span<const double> p, std::span<const double> q,
                        const char* op) {
  if (p.size() != q.size()) {
    fail(ErrorKind::Shape, std::string(op) + ": supports of size " +
                               std::to_string(p.size()) + " and " +
                               std::to_string(q.size()) + " differ");
  }
}

double kl_or_inf(std::span<const double> p, std::span<const double> q) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (q[i] == 0.0 && p[i] > 0.0) return std::numeric_limits<double>::infinity();
  }
  return kl(p, q);
}

bool leq(double a, double b) { return a <= b + kSlackTol; }

bool pinsker(std::span<const double> p, std::span<const double> q) {
  return leq(tv_distance(p, q), std::sqrt(kl_or_inf(p, q) / 2.0));
}

bool sandwich(std::span<const double> p, std::span<const double> q) {
  const double tv = tv_distance(p, q);
  const double js = jsd(p, q);
  return leq(0.5 * tv * tv, js) && leq(js, 2.0 * tv);
}

}  // namespace

DiscreteJoint::DiscreteJoint(std::size_t nx, std::size_t ny,
                             std::vector<double> p)
    : nx_(nx), ny_(ny), p_(std::move(p)) {
  require(nx >= 1 && ny >= 1, "joint: supports must be non-empty");
  if (p_.size() != nx * ny) {
    fail(ErrorKind::Shape, "joint: table has " + std::to_string(p_.size()) +
                               " cells, expected " + std::to_string(nx * ny));
  }
  double total = 0.0;
  for (double v : p_) {
    require(v >= 0.0 && std::isfinite(v), "joint: entries must be non-negative");
    total += v;
  }
  require(std::abs(total - 1.0) <= kSumTol,
          "joint: table sums to " + std::to_string(total) + ", not 1");
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  check_same_support(p, q, "tv_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

double kl(std::span<const double> p, std::span<const double> q) {
  check_same_support(p, q, "kl");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      fail(ErrorKind::Support, "kl: q vanishes at index " + std::to_string(i) +
                                   " where p = " + std::to_string(p[i]));
    }
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(acc, 0.0);
}

double jsd(std::span<const double> p, std::span<const double> q) {
  check_same_support(p, q, "jsd");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  const double value = 0.5 * kl(p, m) + 0.5 * kl(q, m);
  return std::min(value, std::numbers::ln2);
}

std::vector<double> marginal_x(const DiscreteJoint& joint) {
  std::vector<double> out(joint.nx(), 0.0);
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    for (std::size_t y = 0; y < joint.ny(); ++y) out[x] += joint(x, y);
  }
  return out;
}

Conditional conditional_y_given_x(const DiscreteJoint& joint) {
  Conditional out;
  out.table.resize(joint.nx() * joint.ny());
  const auto px = marginal_x(joint);
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      out.table[x * joint.ny() + y] =
          px[x] > 0.0 ? joint(x, y) / px[x] : 1.0 / joint.ny();
    }
    if (px[x] <= 0.0) out.uniform_rows.push_back(x);
  }
  return out;
}

DiscreteJoint random_joint(std::size_t nx, std::size_t ny, Rng& rng) {
  std::vector<double> cells(nx * ny);
  double total = 0.0;
  for (double& c : cells) {
    c = -std::log(1.0 - rng.uniform());
    total += c;
  }
  for (double& c : cells) c /= total;
  // Fold the rounding residue into the largest cell so the table sums to 1.
  double sum = 0.0;
  for (double c : cells) sum += c;
  *std::max_element(cells.begin(), cells.end()) += 1.0 - sum;
  return DiscreteJoint(nx, ny, std::move(cells));
}

TheoremReport verify_theorem1(const DiscreteJoint& q, const DiscreteJoint& p) {
  if (q.nx() != p.nx() || q.ny() != p.ny()) {
    fail(ErrorKind::Shape, "verify_theorem1: joints live on different supports");
  }
  const std::size_t nx = q.nx();
  const std::size_t ny = q.ny();
  TheoremReport r;
  r.nx = nx;
  r.ny = ny;

  const auto qx = marginal_x(q);
  const auto px = marginal_x(p);
  const auto q_cond = conditional_y_given_x(q);
  const auto p_cond = conditional_y_given_x(p);
  if (!q_cond.uniform_rows.empty() || !p_cond.uniform_rows.empty()) {
    r.note = "zero-mass rows given uniform conditionals";
  }

  // Hybrid joint Q_{Y|X} P_X.
  std::vector<double> hybrid(nx * ny);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) {
      hybrid[x * ny + y] = q_cond.table[x * ny + y] * px[x];
    }
  }

  r.c1 = 0.0;
  for (double v : q_cond.table) r.c1 += v;
  r.c1 *= 0.5;
  r.c2 = 0.0;
  for (double v : px) r.c2 += v;
  r.c2 *= 0.5;

  r.lhs_jsd_joint = jsd(q.table(), p.table());
  r.jsd_marginal = jsd(qx, px);
  r.tv_joint = tv_distance(q.table(), p.table());
  r.tv_marginal = tv_distance(qx, px);
  r.tv_conditional = tv_distance(q_cond.table, p_cond.table);
  r.tv_split_marginal = tv_distance(q.table(), hybrid);
  r.tv_split_conditional = tv_distance(hybrid, p.table());

  r.triangle_holds =
      leq(r.tv_joint, r.tv_split_marginal + r.tv_split_conditional);
  r.marginal_step_holds = leq(r.tv_split_marginal, r.c1 * r.tv_marginal);
  r.conditional_step_holds =
      leq(r.tv_split_conditional, r.c2 * r.tv_conditional);
  r.tv_bound_holds =
      leq(r.tv_joint, r.c1 * r.tv_marginal + r.c2 * r.tv_conditional);

  r.pinsker_holds = pinsker(q.table(), p.table()) && pinsker(p.table(), q.table()) &&
                    pinsker(px, qx);
  bool rows_finite = true;
  r.kl_conditional = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    std::span<const double> prow(p_cond.table.data() + x * ny, ny);
    std::span<const double> qrow(q_cond.table.data() + x * ny, ny);
    r.pinsker_holds = r.pinsker_holds && pinsker(prow, qrow);
    const double row_kl = kl_or_inf(prow, qrow);
    if (!std::isfinite(row_kl)) rows_finite = false;
    r.kl_conditional += row_kl;
  }
  r.sandwich_holds =
      sandwich(q.table(), p.table()) && sandwich(qx, px);

  if (!rows_finite) {
    r.applicable = false;
    r.note = "conditional KL is infinite (support violation)";
    r.rhs_total = std::numeric_limits<double>::infinity();
    r.slack = std::numeric_limits<double>::infinity();
    r.holds = false;
    return r;
  }
  r.rhs_total = 2.0 * r.c1 * std::sqrt(2.0 * r.jsd_marginal) +
                2.0 * r.c2 * std::sqrt(2.0 * r.kl_conditional);
  r.slack = r.rhs_total - r.lhs_jsd_joint;
  r.holds = r.slack >= -kSlackTol;
  return r;
}

VerifierRun run_theorem_trials(std::size_t trials, std::size_t max_support,
                               std::uint64_t seed, std::size_t threads) {
  require(max_support >= 1, "max_support must be at least 1");
  VerifierRun run;
  run.reports.resize(trials);
  const Rng root(seed);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < trials; k += stride) {
      Rng rng = root.fork(k);
      const auto hi = static_cast<std::int64_t>(max_support);
      const auto nx = static_cast<std::size_t>(rng.uniform_int(1, hi));
      const auto ny = static_cast<std::size_t>(rng.uniform_int(1, hi));
      DiscreteJoint q = random_joint(nx, ny, rng);
      DiscreteJoint p = random_joint(nx, ny, rng);
      run.reports[k] = verify_theorem1(q, p);
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(trials, 1));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(work, i, threads);
    for (auto& th : pool) th.join();
  }

  auto& s = run.summary;
  s.trials = trials;
  s.min_slack = trials ? std::numeric_limits<double>::infinity() : 0.0;
  for (const auto& r : run.reports) {
    if (!r.applicable) {
      ++s.not_applicable;
    } else {
      if (!r.holds) ++s.violations;
      s.min_slack = std::min(s.min_slack, r.slack);
    }
    if (!r.triangle_holds) ++s.triangle_violations;
    if (!r.pinsker_holds) ++s.pinsker_violations;
    if (!r.sandwich_holds) ++s.sandwich_violations;
    if (!r.conditional_step_holds) ++s.conditional_step_violations;
  }
  if (s.trials == s.not_applicable) s.min_slack = 0.0;
  return run;
}

std::string verifier_to_json(const VerifierRun& run, bool include_reports,
                             int indent) {
  using nlohmann::json;
  const auto& s = run.summary;
  json out;
  out["summary"] = {{"trials", s.trials},
                    {"violations", s.violations},
                    {"triangle_violations", s.triangle_violations},
                    {"pinsker_violations", s.pinsker_violations},
                    {"sandwich_violations", s.sandwich_violations},
                    {"conditional_step_violations", s.conditional_step_violations},
                    {"not_applicable", s.not_applicable},
                    {"min_slack", s.min_slack}};
  if (include_reports) {
    json reports = json::array();
    for (const auto& r : run.reports) {
      // Infinite divergences serialize as null.
      reports.push_back({{"nx", r.nx},
                         {"ny", r.ny},
                         {"applicable", r.applicable},
                         {"note", r.note},
                         {"lhs_jsd_joint", r.lhs_jsd_joint},
                         {"rhs_total", r.rhs_total},
                         {"c1", r.c1},
                         {"c2", r.c2},
                         {"jsd_marginal", r.jsd_marginal},
                         {"kl_conditional", r.kl_conditional},
                         {"tv_joint", r.tv_joint},
                         {"tv_marginal", r.tv_marginal},
                         {"tv_conditional", r.tv_conditional},
                         {"tv_split_marginal", r.tv_split_marginal},
                         {"tv_split_conditional", r.tv_split_conditional},
                         {"triangle_holds", r.triangle_holds},
                         {"marginal_step_holds", r.marginal_step_holds},
                         {"conditional_step_holds", r.conditional_step_holds},
                         {"tv_bound_holds", r.tv_bound_holds},
                         {"pinsker_holds", r.pinsker_holds},
                         {"sandwich_holds", r.sandwich_holds},
                         {"slack", r.slack},
                         {"holds", r.holds}});
    }
    out["reports"] = std::move(reports);
  }
  return out.dump(indent) + "\n";
}

}  // namespace siddm
