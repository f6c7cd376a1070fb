#include "mvcp/gcp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "mvcp/error.hpp"

namespace mvcp {

namespace {

std::vector<std::size_t> rows_of(const ScoreTable& table, std::size_t g) {
  std::vector<std::size_t> rows;
  auto col = table.group_column(g);
  for (std::size_t i = 0; i < col.size(); ++i)
    if (col[i]) rows.push_back(i);
  return rows;
}

double group_coverage(const std::vector<double>& f, const ScoreTable& table,
                      const std::vector<std::size_t>& rows) {
  std::size_t covered = 0;
  for (std::size_t i : rows)
    if (table.score(i) <= f[i]) ++covered;
  return static_cast<double>(covered) / static_cast<double>(rows.size());
}

constexpr double kActiveSlack = 1e-12;
constexpr double kEscapeSlack = 1e-13;
constexpr std::size_t kMaxEscapeDirections = 4000;

// Exact minimizer over t of sum_i L_q(f_i + t c_i, s_i): the derivative
// starts negative and each breakpoint raises it by |c_i|.
double line_minimizer(const std::vector<double>& f, const std::vector<double>& c,
                      const ScoreTable& table, double q) {
  std::vector<std::pair<double, double>> breaks;
  double slope = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (c[i] == 0.0) continue;
    breaks.emplace_back((table.score(i) - f[i]) / c[i], std::abs(c[i]));
    slope -= c[i] > 0.0 ? c[i] * q : -c[i] * (1.0 - q);
  }
  if (breaks.empty()) return 0.0;
  std::sort(breaks.begin(), breaks.end());
  for (const auto& [t, w] : breaks) {
    slope += w;
    if (slope >= 0.0) return t;
  }
  return breaks.back().first;
}

// Candidate descent directions at a point where coordinate steps stall:
// the lineality directions of the hyperplanes through it and the edges
// of their arrangement. A convex piecewise-linear function that is not
// minimal here decreases along one of them.
std::vector<Eigen::VectorXd> escape_directions(const std::vector<Eigen::VectorXd>& active,
                                               std::size_t dim) {
  std::vector<Eigen::VectorXd> dirs;
  const auto R = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(active.size()), R);
  for (std::size_t k = 0; k < active.size(); ++k) M.row(static_cast<Eigen::Index>(k)) = active[k];
  Eigen::MatrixXd lineal;
  Eigen::Index rank = 0;
  if (active.empty()) {
    lineal = Eigen::MatrixXd::Identity(R, R);
  } else {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    rank = lu.rank();
    if (rank < R) lineal = lu.kernel();
  }
  for (Eigen::Index j = 0; j < lineal.cols(); ++j) {
    dirs.push_back(lineal.col(j));
    dirs.push_back(-lineal.col(j));
  }
  if (rank == 0) return dirs;

  const auto k = active.size();
  const auto pick = static_cast<std::size_t>(rank - 1);
  std::vector<std::size_t> idx(pick);
  std::iota(idx.begin(), idx.end(), 0);
  while (dirs.size() < kMaxEscapeDirections) {
    Eigen::MatrixXd C(static_cast<Eigen::Index>(pick) + lineal.cols(), R);
    for (std::size_t a = 0; a < pick; ++a) C.row(static_cast<Eigen::Index>(a)) = active[idx[a]];
    for (Eigen::Index j = 0; j < lineal.cols(); ++j)
      C.row(static_cast<Eigen::Index>(pick) + j) = lineal.col(j).transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
    if (lu.rank() == R - 1) {
      Eigen::VectorXd d = lu.kernel().col(0);
      dirs.push_back(d);
      dirs.push_back(-d);
    }
    // next combination of `pick` out of k
    std::size_t pos = pick;
    while (pos > 0 && idx[pos - 1] == k - pick + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t a = pos; a < pick; ++a) idx[a] = idx[a - 1] + 1;
  }
  return dirs;
}

}  // namespace

double coordinate_shift(const ScoreTable& table, const GroupLinearModel& model,
                        std::size_t g, double q) {
  if (g >= table.num_groups()) throw std::out_of_range("group index out of range");
  const auto rows = rows_of(table, g);
  if (rows.empty()) throw EmptySelectionError("group " + table.groups().name(g) + " has no rows");

  std::vector<double> residuals;
  residuals.reserve(rows.size());
  for (std::size_t i : rows) residuals.push_back(table.score(i) - group_linear_value(model, table, i));
  double delta = empirical_quantile(residuals, q, QuantileRule::Plain);

  // Rounding in f0 + sum(lambda) can leave the order-statistic row one ulp
  // above its threshold; step delta upward until the required count holds.
  const auto needed = static_cast<std::size_t>(
      std::clamp(std::ceil(q * static_cast<double>(rows.size())), 1.0,
                 static_cast<double>(rows.size())));
  GroupLinearModel trial = model;
  for (int attempt = 0; attempt < 64; ++attempt) {
    trial.lambda[g] = model.lambda[g] + delta;
    std::size_t covered = 0;
    for (std::size_t i : rows)
      if (table.score(i) <= group_linear_value(trial, table, i)) ++covered;
    if (covered >= needed) break;
    delta = std::nextafter(delta, std::numeric_limits<double>::infinity());
  }
  return delta;
}

GcpFit fit_gcp(const ScoreTable& table, const BaseThreshold& f0, const GcpOptions& options) {
  if (table.empty()) throw EmptySelectionError("calibration table is empty");
  if (!(options.q > 0.0 && options.q < 1.0)) throw std::invalid_argument("q must lie in (0,1)");
  const double q = options.q;
  const std::size_t num_groups = table.num_groups();

  GcpFit fit;
  fit.model.base = f0;
  fit.model.lambda = options.initial_lambda.empty() ? std::vector<double>(num_groups, 0.0)
                                                    : options.initial_lambda;
  if (fit.model.lambda.size() != num_groups)
    throw std::invalid_argument("initial lambda length does not match group count");
  for (double l : fit.model.lambda)
    if (!std::isfinite(l)) throw std::invalid_argument("initial lambda must be finite");

  std::vector<std::size_t> retained;
  std::vector<std::vector<std::size_t>> members(num_groups);
  for (std::size_t g = 0; g < num_groups; ++g) {
    members[g] = rows_of(table, g);
    if (members[g].empty()) {
      fit.dropped_groups.push_back(g);
      fit.warnings.push_back("group " + table.groups().name(g) +
                             " has no calibration rows; dropped");
      fit.model.lambda[g] = 0.0;
    } else {
      retained.push_back(g);
    }
  }
  if (retained.empty()) throw std::invalid_argument("no group has calibration rows");

  std::size_t smallest = table.size();
  for (std::size_t g : retained) smallest = std::min(smallest, members[g].size());
  fit.tol = options.tol ? *options.tol
                        : static_cast<double>(retained.size()) / static_cast<double>(smallest);

  std::vector<double> f = thresholds(fit.model, table);
  fit.initial_pinball = mean_pinball(f, table.scores(), q);
  fit.pinball = fit.initial_pinball;
  fit.group_errors.assign(num_groups, 0.0);

  auto worst_error = [&] {
    double worst = 0.0;
    for (std::size_t g : retained) {
      fit.group_errors[g] = std::abs(group_coverage(f, table, members[g]) - q);
      worst = std::max(worst, fit.group_errors[g]);
    }
    return worst;
  };

  auto escape = [&](GroupLinearModel& model, std::vector<double>& f) {
    const std::size_t R = retained.size();
    std::vector<Eigen::VectorXd> active;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (!(std::abs(table.score(i) - f[i]) <= kActiveSlack)) continue;
      Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(R));
      for (std::size_t r = 0; r < R; ++r) a(static_cast<Eigen::Index>(r)) = table.member(i, retained[r]);
      if (a.isZero()) continue;
      if (std::none_of(active.begin(), active.end(), [&](const Eigen::VectorXd& b) { return b == a; }))
        active.push_back(a);
    }
    std::vector<double> c(table.size());
    for (const Eigen::VectorXd& d : escape_directions(active, R)) {
      for (std::size_t i = 0; i < table.size(); ++i) {
        double ci = 0.0;
        for (std::size_t r = 0; r < R; ++r)
          if (table.member(i, retained[r])) ci += d(static_cast<Eigen::Index>(r));
        c[i] = std::abs(ci) < 1e-12 ? 0.0 : ci;
      }
      const double t = line_minimizer(f, c, table, q);
      if (!(t != 0.0) || !std::isfinite(t)) continue;
      GroupLinearModel trial = model;
      for (std::size_t r = 0; r < R; ++r) trial.lambda[retained[r]] += t * d(static_cast<Eigen::Index>(r));
      std::vector<double> moved = thresholds(trial, table);
      const double loss = mean_pinball(moved, table.scores(), q);
      if (!(fit.pinball - loss > kEscapeSlack)) continue;
      model = std::move(trial);
      f = std::move(moved);
      fit.pinball = loss;
      fit.step_losses.push_back(loss);
      ++fit.accepted_steps;
      ++fit.escapes;
      return true;
    }
    return false;
  };

  while (true) {
    if (worst_error() <= fit.tol) {
      fit.converged = true;
      break;
    }
    if (fit.sweeps >= options.max_sweeps) break;
    ++fit.sweeps;
    int accepted_this_sweep = 0;
    for (std::size_t g : retained) {
      const double delta = coordinate_shift(table, fit.model, g, q);
      GroupLinearModel trial = fit.model;
      trial.lambda[g] += delta;
      double change = 0.0;
      std::vector<double> updated(members[g].size());
      for (std::size_t k = 0; k < members[g].size(); ++k) {
        const std::size_t i = members[g][k];
        updated[k] = group_linear_value(trial, table, i);
        change += pinball_loss(updated[k], table.score(i), q) - pinball_loss(f[i], table.score(i), q);
      }
      if (!(change < 0.0)) continue;
      std::vector<double> moved = f;
      for (std::size_t k = 0; k < members[g].size(); ++k) moved[members[g][k]] = updated[k];
      // a real but sub-ulp gain can round the full mean upward
      const double loss = mean_pinball(moved, table.scores(), q);
      if (loss > fit.pinball) continue;
      fit.model = std::move(trial);
      f = std::move(moved);
      fit.pinball = loss;
      fit.step_losses.push_back(fit.pinball);
      ++fit.accepted_steps;
      ++accepted_this_sweep;
    }
    // A sweep without progress is a coordinate-wise minimum. Coordinate
    // steps cannot leave it, so look for a joint descent direction.
    if (accepted_this_sweep == 0) {
      if (escape(fit.model, f)) continue;
      worst_error();
      fit.converged = false;
      break;
    }
  }
  return fit;
}

}  // namespace mvcp
