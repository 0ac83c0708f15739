#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "siddm/rng.hpp"

namespace siddm {

/// Exact probability table over a finite product space X x Y, row-major
/// p[x * ny + y].
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t nx, std::size_t ny, std::vector<double> p);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double operator()(std::size_t x, std::size_t y) const { return p_[x * ny_ + y]; }
  std::span<const double> table() const { return p_; }

 private:
  std::size_t nx_;
  std::size_t ny_;
  std::vector<double> p_;
};

/// Total variation distance, 0.5 * sum |p - q|.
double tv_distance(std::span<const double> p, std::span<const double> q);
/// KL(p || q) in nats; throws ErrorKind::Support naming the first index where
/// q vanishes but p does not.
double kl(std::span<const double> p, std::span<const double> q);
/// Jensen-Shannon divergence in nats, bounded by ln 2.
double jsd(std::span<const double> p, std::span<const double> q);

std::vector<double> marginal_x(const DiscreteJoint& joint);

struct Conditional {
  /// Row-major table of p(y | x).
  std::vector<double> table;
  /// Rows with zero marginal mass that were given the uniform conditional.
  std::vector<std::size_t> uniform_rows;
};

Conditional conditional_y_given_x(const DiscreteJoint& joint);

/// Dirichlet(1) over all nx * ny cells.
DiscreteJoint random_joint(std::size_t nx, std::size_t ny, Rng& rng);

/// Numeric audit of the joint-JSD bound and every step of its derivation
/// for one pair (Q = forward-process joint, P = model joint). Measures are
/// counting measures, logs are natural.
struct TheoremReport {
  std::size_t nx = 0;
  std::size_t ny = 0;
  bool applicable = true;  ///< false when the conditional KL is infinite
  std::string note;

  double lhs_jsd_joint = 0.0;
  double rhs_total = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double jsd_marginal = 0.0;
  double kl_conditional = 0.0;
  double tv_joint = 0.0;
  double tv_marginal = 0.0;
  double tv_conditional = 0.0;

  // Triangle split through the hybrid Q_{Y|X} P_X.
  double tv_split_marginal = 0.0;     ///< tv(Q_XY, Q_{Y|X} P_X)
  double tv_split_conditional = 0.0;  ///< tv(Q_{Y|X} P_X, P_XY)
  bool triangle_holds = false;
  bool marginal_step_holds = false;     ///< split_marginal <= c1 tv_marginal
  bool conditional_step_holds = false;  ///< split_conditional <= c2 tv_conditional
  bool tv_bound_holds = false;          ///< tv_joint <= c1 tv_marginal + c2 tv_conditional
  bool pinsker_holds = false;           ///< joint, marginal and every conditional row
  bool sandwich_holds = false;          ///< 0.5 tv^2 <= jsd <= 2 tv, joint and marginal

  double slack = 0.0;  ///< rhs_total - lhs_jsd_joint
  bool holds = false;  ///< slack >= -1e-12
};

TheoremReport verify_theorem1(const DiscreteJoint& q, const DiscreteJoint& p);

struct VerifierSummary {
  std::size_t trials = 0;
  std::size_t violations = 0;             ///< composite bound failures
  std::size_t triangle_violations = 0;
  std::size_t pinsker_violations = 0;
  std::size_t sandwich_violations = 0;
  std::size_t conditional_step_violations = 0;
  std::size_t not_applicable = 0;
  double min_slack = 0.0;
};

struct VerifierRun {
  std::vector<TheoremReport> reports;
  VerifierSummary summary;
};

/// `trials` random pairs with support sizes drawn from [1, max_support] in
/// each coordinate. Trial k uses its own stream forked from `seed`, so the
/// result does not depend on `threads`.
VerifierRun run_theorem_trials(std::size_t trials, std::size_t max_support,
                               std::uint64_t seed, std::size_t threads = 1);

/// {"summary": {...}, "reports": [...]}; reports are omitted when
/// `include_reports` is false.
std::string verifier_to_json(const VerifierRun& run, bool include_reports = true,
                             int indent = 2);

}  // namespace siddm
