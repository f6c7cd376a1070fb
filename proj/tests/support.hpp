#pragma once

// Table builders, random instance generators and brute-force reference
// implementations shared by the unit tests and the acceptance runner. The
// reference code deliberately avoids the library's own helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvcp/core.hpp"

namespace testing {

using Rows = std::vector<std::vector<int>>;  // row-major membership

inline std::vector<std::string> names(std::size_t G, const std::string& prefix = "g") {
  std::vector<std::string> out;
  for (std::size_t g = 0; g < G; ++g) out.push_back(prefix + std::to_string(g + 1));
  return out;
}

inline mvcp::ScoreTable make_table(const std::vector<double>& scores, const Rows& rows,
                                   mvcp::TableInfo info = {}) {
  const std::size_t n = scores.size();
  const std::size_t G = rows.empty() ? 0 : rows[0].size();
  std::vector<std::uint8_t> mem(n * G);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t g = 0; g < G; ++g) mem[g * n + i] = static_cast<std::uint8_t>(rows[i][g]);
  return mvcp::ScoreTable(scores, mvcp::GroupCollection(names(G)), std::move(mem), std::move(info));
}

// Every row in the single group "all".
inline mvcp::ScoreTable whole_space(const std::vector<double>& scores) {
  std::vector<std::uint8_t> mem(scores.size(), 1);
  return mvcp::ScoreTable(scores, mvcp::GroupCollection({"all"}), std::move(mem));
}

inline std::vector<double> tenths() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}; }

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin(double p = 0.5) { return uniform() < p; }

  // Scores optionally snapped to a coarse lattice so that ties with grid
  // thresholds actually occur.
  mvcp::ScoreTable table(std::size_t n, std::size_t G, double p_member = 0.5, int lattice = 0) {
    std::vector<double> scores(n);
    Rows rows(n, std::vector<int>(G));
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = lattice > 0 ? integer(0, lattice) / static_cast<double>(lattice) : uniform();
      for (std::size_t g = 0; g < G; ++g) rows[i][g] = coin(p_member);
    }
    return make_table(scores, rows);
  }

  mvcp::BucketedModel bucketed(const mvcp::ScoreTable& table, int m, int num_patches);
};

// ---------------------------------------------------------------------------
// Reference implementations
// ---------------------------------------------------------------------------

inline double pinball(double tau, double s, double q) {
  return s > tau ? q * (s - tau) : (1.0 - q) * (tau - s);
}

// Grid level of every row, replaying patches one row at a time.
inline std::vector<int> ref_levels(const mvcp::BucketedModel& model, const mvcp::ScoreTable& t) {
  std::vector<int> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double b = model.base.is_per_row() ? (*t.base())[i] : model.base.value();
    int level = static_cast<int>(std::lround(b * model.m));
    for (const auto& p : model.patches) {
      const bool in = p.group == mvcp::kMarginal || t.member(i, static_cast<std::size_t>(p.group));
      if (in && level == p.level) level += p.shift;
    }
    out[i] = level;
  }
  return out;
}

struct RefCell {
  int group = -1;
  int level = -1;
  double error = -1.0;
};

inline double ref_cell_error(const mvcp::ScoreTable& t, const std::vector<int>& levels, int m,
                             std::size_t g, int level, double q) {
  double count = 0, covered = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t.member(i, g) || levels[i] != level) continue;
    count += 1;
    if (t.score(i) <= static_cast<double>(level) / m) covered += 1;
  }
  if (count == 0) return 0.0;
  const double d = covered / count - q;
  return (count / static_cast<double>(t.size())) * d * d;
}

// Largest cell error; among cells equal to it up to 1e-12 (relative), the
// lowest group then lowest level.
inline RefCell ref_worst_cell(const mvcp::ScoreTable& t, const std::vector<int>& levels, int m,
                              double q) {
  std::vector<RefCell> all;
  double top = 0.0;
  for (std::size_t g = 0; g < t.num_groups(); ++g)
    for (int v = 0; v <= m; ++v) {
      all.push_back({static_cast<int>(g), v, ref_cell_error(t, levels, m, g, v, q)});
      top = std::max(top, all.back().error);
    }
  for (const auto& c : all)
    if (c.error >= top - 1e-12 * top) return c;
  return {};
}

inline double ref_cell_loss(const mvcp::ScoreTable& t, const std::vector<int>& levels, int m,
                            std::size_t g, int level, int target, double q) {
  double total = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.member(i, g) && levels[i] == level) total += pinball(static_cast<double>(target) / m, t.score(i), q);
  return total;
}

// Minimizing shift over every feasible target; near-ties (1e-12 relative)
// prefer the smaller |shift|, then the negative one.
inline int ref_best_shift(const mvcp::ScoreTable& t, const std::vector<int>& levels, int m,
                          std::size_t g, int level, double q) {
  std::vector<std::pair<int, double>> cand;
  double best = std::numeric_limits<double>::infinity();
  for (int target = 0; target <= m; ++target) {
    const double l = ref_cell_loss(t, levels, m, g, level, target, q);
    cand.emplace_back(target - level, l);
    best = std::min(best, l);
  }
  int pick = 0;
  bool found = false;
  for (const auto& [shift, l] : cand) {
    if (l > best + 1e-12 * std::max(1.0, best)) continue;
    if (!found || std::abs(shift) < std::abs(pick) ||
        (std::abs(shift) == std::abs(pick) && shift < pick)) {
      pick = shift;
      found = true;
    }
  }
  return pick;
}

// Q(f,g) by direct summation over levels.
inline double ref_Q(const mvcp::ScoreTable& t, const std::vector<int>& levels,
                    const std::vector<double>& thr, int m, std::size_t g, double q) {
  double ng = 0;
  for (std::size_t i = 0; i < t.size(); ++i) ng += t.member(i, g);
  double total = 0;
  for (int v = 0; v <= m; ++v) {
    double c = 0, cov = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!t.member(i, g) || levels[i] != v) continue;
      c += 1;
      cov += t.score(i) <= thr[i];
    }
    if (c > 0) total += (c / ng) * (q - cov / c) * (q - cov / c);
  }
  return total;
}

// Exhaustive 1-D line search for the group-g coordinate: the loss is
// piecewise linear with kinks at the residuals, so its smallest minimizer
// is one of them.
inline double ref_coordinate_shift(const mvcp::ScoreTable& t, const std::vector<double>& f,
                                   std::size_t g, double q) {
  std::vector<double> r;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.member(i, g)) r.push_back(t.score(i) - f[i]);
  auto loss = [&](double d) {
    double total = 0;
    for (double x : r) total += pinball(d, x, q);
    return total;
  };
  double best = 0, arg = 0;
  bool found = false;
  std::vector<double> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  for (double c : sorted) {
    const double l = loss(c);
    if (!found || l < best - 1e-12 * std::max(1.0, best)) {
      found = true;
      best = l;
      arg = c;
    }
  }
  return arg;
}

// Global minimum of the mean pinball loss of f0 + sum lambda_g g over
// lambda: a convex piecewise-linear function attains it at a vertex where
// rank(G) of the kink hyperplanes meet. Groups must be linearly
// independent on the table.
inline double ref_gcp_minimum(const mvcp::ScoreTable& t, double f0, double q) {
  const std::size_t n = t.size(), G = t.num_groups();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(G));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t g = 0; g < G; ++g) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) = t.member(i, g);
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (pick.size() == G) {
      Eigen::MatrixXd B(static_cast<Eigen::Index>(G), static_cast<Eigen::Index>(G));
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(G));
      for (std::size_t a = 0; a < G; ++a) {
        B.row(static_cast<Eigen::Index>(a)) = A.row(static_cast<Eigen::Index>(pick[a]));
        rhs(static_cast<Eigen::Index>(a)) = t.score(pick[a]) - f0;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
      if (lu.rank() < static_cast<Eigen::Index>(G)) return;
      const Eigen::VectorXd lam = lu.solve(rhs);
      double total = 0;
      for (std::size_t i = 0; i < n; ++i) total += pinball(f0 + A.row(static_cast<Eigen::Index>(i)).dot(lam), t.score(i), q);
      best = std::min(best, total / static_cast<double>(n));
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return best;
}

inline bool full_column_rank(const mvcp::ScoreTable& t) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(t.num_groups()));
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t g = 0; g < t.num_groups(); ++g) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) = t.member(i, g);
  return Eigen::FullPivLU<Eigen::MatrixXd>(A).rank() == static_cast<Eigen::Index>(t.num_groups());
}

inline mvcp::BucketedModel Gen::bucketed(const mvcp::ScoreTable& table, int m, int num_patches) {
  mvcp::BucketedModel model;
  model.m = m;
  model.base = mvcp::BaseThreshold::constant(integer(0, m) / static_cast<double>(m));
  for (int k = 0; k < num_patches; ++k) {
    auto levels = ref_levels(model, table);
    const int g = coin(0.2) ? mvcp::kMarginal : integer(0, static_cast<int>(table.num_groups()) - 1);
    const int from = levels[static_cast<std::size_t>(integer(0, static_cast<int>(table.size()) - 1))];
    const int to = integer(0, m);
    model.patches.push_back({g, from, to - from});
  }
  return model;
}

}  // namespace testing
