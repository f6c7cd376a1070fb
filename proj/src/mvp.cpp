#include "mvcp/mvp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <stdexcept>

#include "mvcp/error.hpp"

namespace mvcp {

namespace {

// Two candidate shifts whose cell losses differ by less than this (relative)
// are treated as tied.
constexpr double kLossTieSlack = 1e-12;
// Minimum decrease of the mean pinball loss for a patch to be accepted.
constexpr double kDescentSlack = 1e-12;
// Cell errors within this relative distance count as tied, so that cells
// equal up to rounding fall to the lowest (group, level).
constexpr double kErrorTieSlack = 1e-12;

double cell_loss(const ScoreTable& table, std::span<const std::size_t> rows, double tau, double q) {
  double loss = 0.0;
  for (std::size_t i : rows) loss += pinball_loss(tau, table.score(i), q);
  return loss;
}

std::vector<std::size_t> cell_rows(const ScoreTable& table, std::span<const int> levels,
                                   std::size_t g, int level) {
  std::vector<std::size_t> rows;
  auto col = table.group_column(g);
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (col[i] && levels[i] == level) rows.push_back(i);
  return rows;
}

int best_shift_for_rows(const ScoreTable& table, std::span<const std::size_t> rows, int level,
                        int m, double q) {
  int best = 0;
  double best_loss = cell_loss(table, rows, grid_value(level, m), q);
  // Visit 0, -1, +1, -2, +2, ... so the first strict improvement wins ties.
  for (int step = 1; step <= m; ++step) {
    for (int shift : {-step, step}) {
      const int target = level + shift;
      if (target < 0 || target > m) continue;
      const double loss = cell_loss(table, rows, grid_value(target, m), q);
      if (loss < best_loss - kLossTieSlack * std::max(1.0, std::abs(best_loss))) {
        best = shift;
        best_loss = loss;
      }
    }
  }
  return best;
}

// Worst cell among those not excluded, scanning groups then levels.
std::optional<CellChoice> pick_worst(const CellStats& stats, double q,
                                     const std::vector<char>& excluded) {
  std::optional<CellChoice> best;
  const std::size_t width = static_cast<std::size_t>(stats.m() + 1);
  for (std::size_t g = 0; g < stats.num_groups(); ++g) {
    for (int level = 0; level <= stats.m(); ++level) {
      if (!excluded.empty() && excluded[g * width + static_cast<std::size_t>(level)]) continue;
      const double err = stats.cell_error(g, level, q);
      if (!best || err > best->error + kErrorTieSlack * best->error)
        best = CellChoice{static_cast<int>(g), level, grid_value(level, stats.m()), err};
    }
  }
  return best;
}

std::string format_grid(int level, int m) {
  return std::to_string(level) + "/" + std::to_string(m);
}

void check_levels(const ScoreTable& table, std::span<const int> levels, int m) {
  if (levels.size() != table.size()) throw std::invalid_argument("level vector does not match table");
  if (m < 1) throw std::invalid_argument("grid resolution must be positive");
}

}  // namespace

CellStats::CellStats(const ScoreTable& table, std::span<const int> levels,
                     std::span<const double> thresholds, int m)
    : m_(m), rows_(table.size()), num_groups_(table.num_groups()) {
  check_levels(table, levels, m);
  if (thresholds.size() != table.size())
    throw std::invalid_argument("threshold vector does not match table");
  const std::size_t cells = num_groups_ * static_cast<std::size_t>(m + 1);
  count_.assign(cells, 0);
  covered_.assign(cells, 0);
  group_rows_.assign(num_groups_, 0);
  for (std::size_t g = 0; g < num_groups_; ++g) {
    auto col = table.group_column(g);
    for (std::size_t i = 0; i < rows_; ++i) {
      if (!col[i]) continue;
      if (levels[i] < 0 || levels[i] > m) throw std::out_of_range("grid level outside [0,m]");
      const std::size_t s = slot(g, levels[i]);
      ++count_[s];
      if (table.score(i) <= thresholds[i]) ++covered_[s];
      ++group_rows_[g];
    }
  }
}

CellStats::CellStats(const ScoreTable& table, std::span<const int> levels, int m)
    : CellStats(table, levels,
                [&] {
                  std::vector<double> t(levels.size());
                  for (std::size_t i = 0; i < levels.size(); ++i) t[i] = grid_value(levels[i], m);
                  return t;
                }(),
                m) {}

double CellStats::cell_error(std::size_t g, int level, double q) const {
  const std::size_t c = count(g, level);
  if (c == 0) return 0.0;
  const double mass = static_cast<double>(c) / static_cast<double>(rows_);
  const double dev = q - static_cast<double>(covered(g, level)) / static_cast<double>(c);
  return mass * dev * dev;
}

double CellStats::calibration_error(std::size_t g, double q) const {
  const std::size_t ng = group_rows_.at(g);
  if (ng == 0) throw EmptySelectionError("calibration error of an empty group");
  double total = 0.0;
  for (int level = 0; level <= m_; ++level) {
    const std::size_t c = count(g, level);
    if (c == 0) continue;
    const double weight = static_cast<double>(c) / static_cast<double>(ng);
    const double dev = q - static_cast<double>(covered(g, level)) / static_cast<double>(c);
    total += weight * dev * dev;
  }
  return total;
}

double cell_error(const ScoreTable& table, const BucketedModel& model, std::size_t g, double v,
                  double q) {
  const int level = grid_index_of(v, model.m);
  if (level < 0 || level > model.m) return 0.0;
  auto levels = grid_levels(model, table);
  return CellStats(table, levels, model.m).cell_error(g, level, q);
}

CellChoice worst_cell(const CellStats& stats, double q) {
  return pick_worst(stats, q, {}).value_or(CellChoice{});
}

CellChoice worst_cell(const ScoreTable& table, const BucketedModel& model, double q) {
  auto levels = grid_levels(model, table);
  return worst_cell(CellStats(table, levels, model.m), q);
}

int best_patch_shift(const ScoreTable& table, std::span<const int> levels, int m, std::size_t g,
                     int level, double q) {
  check_levels(table, levels, m);
  if (g >= table.num_groups()) throw std::out_of_range("group index out of range");
  const auto rows = cell_rows(table, levels, g, level);
  if (rows.empty()) throw EmptySelectionError("patch search over an empty cell");
  return best_shift_for_rows(table, rows, level, m, q);
}

double best_patch_delta(const ScoreTable& table, const BucketedModel& model, std::size_t g,
                        double v, double q) {
  auto levels = grid_levels(model, table);
  const int shift = best_patch_shift(table, levels, model.m, g, grid_index_of(v, model.m), q);
  return grid_value(shift, model.m);
}

MulticalibrationCheck multicalibration_check(const CellStats& stats, const GroupCollection& groups,
                                             double q, double alpha) {
  MulticalibrationCheck out;
  const std::size_t G = stats.num_groups();
  out.q_values.assign(G, 0.0);
  out.weighted.assign(G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t ng = stats.group_rows(g);
    if (ng == 0) {
      out.skipped.push_back(g);
      out.warnings.push_back("group " + groups.name(g) + " has no rows; skipped");
      continue;
    }
    out.q_values[g] = stats.calibration_error(g, q);
    out.weighted[g] = out.q_values[g] * (static_cast<double>(ng) / static_cast<double>(stats.rows()));
    if (out.weighted[g] > alpha) out.pass = false;
  }
  return out;
}

MulticalibrationCheck multicalibration_check(const ScoreTable& table, const BucketedModel& model,
                                             double q, double alpha) {
  auto levels = grid_levels(model, table);
  return multicalibration_check(CellStats(table, levels, model.m), table.groups(), q, alpha);
}

std::string to_string(HaltReason reason) {
  switch (reason) {
    case HaltReason::Multicalibrated: return "multicalibrated";
    case HaltReason::MaxIters: return "max_iters";
    case HaltReason::Stalled: return "stalled";
  }
  return "unknown";
}

MvpFit fit_mvp(const ScoreTable& table, const BaseThreshold& f0, const CalibConfig& config) {
  config.validate();
  if (table.empty()) throw EmptySelectionError("calibration table is empty");
  const double q = config.q;
  const int m = config.m;
  const double n = static_cast<double>(table.size());

  MvpFit fit;
  fit.model.base = f0;
  fit.model.m = m;
  std::vector<int> levels = grid_levels(fit.model, table);

  auto total_loss = [&] {
    std::vector<double> t(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) t[i] = grid_value(levels[i], m);
    return mean_pinball(t, table.scores(), q);
  };
  double loss = total_loss();
  fit.trace.initial_pinball = loss;

  for (int t = 1;; ++t) {
    CellStats stats(table, levels, m);
    if (multicalibration_check(stats, table.groups(), q, config.alpha).pass) {
      fit.trace.halting = HaltReason::Multicalibrated;
      break;
    }
    if (t > config.max_iters) {
      fit.trace.halting = HaltReason::MaxIters;
      break;
    }

    // Try cells from worst down until one patch lowers the loss.
    std::vector<char> tried(stats.num_groups() * static_cast<std::size_t>(m + 1), 0);
    bool accepted = false;
    int skipped = 0;
    while (auto cell = pick_worst(stats, q, tried)) {
      if (!(cell->error > 0.0)) break;
      tried[static_cast<std::size_t>(cell->group) * static_cast<std::size_t>(m + 1) +
            static_cast<std::size_t>(cell->level)] = 1;
      const auto rows = cell_rows(table, levels, cell->group, cell->level);
      const int shift = best_shift_for_rows(table, rows, cell->level, m, q);
      double after = loss;
      if (shift != 0) {
        for (std::size_t i : rows) levels[i] += shift;
        after = total_loss();
      }
      if (!(loss - after > kDescentSlack)) {
        if (shift != 0)
          for (std::size_t i : rows) levels[i] -= shift;
        ++skipped;
        fit.trace.events.push_back("round " + std::to_string(t) + ": cell (" +
                                   table.groups().name(cell->group) + ", " +
                                   format_grid(cell->level, m) + ") skipped, no descent");
        continue;
      }
      loss = after;
      fit.model.patches.push_back({cell->group, cell->level, shift});
      fit.trace.iterations.push_back({t, cell->group, cell->v,
                                      static_cast<double>(rows.size()) / n, cell->error,
                                      grid_value(shift, m), loss, skipped});
      accepted = true;
      break;
    }
    if (!accepted) {
      fit.trace.halting = HaltReason::Stalled;
      break;
    }
  }
  return fit;
}

}  // namespace mvcp
