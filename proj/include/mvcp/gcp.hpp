#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mvcp/core.hpp"

namespace mvcp {

struct GcpOptions {
  double q = 0.9;
  // Worst-group |coverage - q| at which the fit stops. Unset: |G| / n_min,
  // the most a coordinate-wise minimum can overshoot q through rows tied
  // exactly at their threshold (at most rank(G) such rows on jittered data).
  std::optional<double> tol;
  int max_sweeps = 1000;
  // Warm start; empty means all zeros.
  std::vector<double> initial_lambda;
};

struct GcpFit {
  GroupLinearModel model;
  int sweeps = 0;
  int accepted_steps = 0;
  // Accepted steps along joint directions taken when every coordinate
  // step had stalled.
  int escapes = 0;
  bool converged = false;
  double tol = 0.0;
  // |Pr[s <= f | g] - q| per group on the calibration table; 0 for dropped groups.
  std::vector<double> group_errors;
  double initial_pinball = 0.0;
  double pinball = 0.0;
  // Mean pinball loss after every accepted coordinate step.
  std::vector<double> step_losses;
  std::vector<std::size_t> dropped_groups;
  std::vector<std::string> warnings;
};

/**
 * Exact minimizer of the pinball loss along coordinate `g` of a group-linear
 * model: the plain q-quantile of the residuals s - f(x) over rows in g.
 * The returned shift is nudged by at most a few ulps so that adding it to
 * lambda_g covers the order-statistic row under canonical evaluation.
 */
double coordinate_shift(const ScoreTable& table, const GroupLinearModel& model,
                        std::size_t g, double q);

// Cyclic exact coordinate descent over the group coefficients. When a full
// sweep makes no progress short of tol, a step along an edge of the local
// kink arrangement is tried before giving up.
GcpFit fit_gcp(const ScoreTable& table, const BaseThreshold& f0, const GcpOptions& options);

}  // namespace mvcp
