#include "mvcp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mvcp/error.hpp"
#include "mvcp/mvp.hpp"

namespace mvcp {

LevelSets level_sets(const ThresholdModel& model, const ScoreTable& table, int m) {
  LevelSets out;
  if (const auto* bucketed = std::get_if<BucketedModel>(&model)) {
    out.m = bucketed->m;
    out.levels = grid_levels(*bucketed, table);
    out.thresholds.resize(out.levels.size());
    for (std::size_t i = 0; i < out.levels.size(); ++i)
      out.thresholds[i] = grid_value(out.levels[i], out.m);
    return out;
  }
  if (m < 1) throw std::invalid_argument("grid resolution must be positive");
  out.m = m;
  out.thresholds = thresholds(model, table);
  out.levels.resize(out.thresholds.size());
  for (std::size_t i = 0; i < out.thresholds.size(); ++i)
    out.levels[i] = round_to_grid_index(std::clamp(out.thresholds[i], 0.0, 1.0), m);
  return out;
}

std::vector<std::optional<double>> group_coverage(const ThresholdModel& model,
                                                  const ScoreTable& table) {
  if (table.empty()) throw EmptySelectionError("coverage of an empty table");
  auto f = thresholds(model, table);
  std::vector<std::optional<double>> out(table.num_groups());
  for (std::size_t g = 0; g < table.num_groups(); ++g) {
    if (table.group_size(g) == 0) continue;
    out[g] = coverage_rate(f, table.scores(), table.group_column(g));
  }
  return out;
}

double calibration_error_Q(const ThresholdModel& model, const ScoreTable& table, std::size_t g,
                           double q, int m) {
  if (g >= table.num_groups()) throw std::out_of_range("group index out of range");
  auto sets = level_sets(model, table, m);
  return CellStats(table, sets.levels, sets.thresholds, sets.m).calibration_error(g, q);
}

std::vector<CellRow> cell_coverage_table(const ThresholdModel& model, const ScoreTable& table,
                                         int m) {
  auto sets = level_sets(model, table, m);
  CellStats stats(table, sets.levels, sets.thresholds, sets.m);
  std::vector<CellRow> rows;
  for (std::size_t g = 0; g < table.num_groups(); ++g)
    for (int level = 0; level <= sets.m; ++level) {
      const std::size_t c = stats.count(g, level);
      if (c == 0) continue;
      rows.push_back({g, level, grid_value(level, sets.m), c,
                      static_cast<double>(stats.covered(g, level)) / static_cast<double>(c)});
    }
  return rows;
}

std::vector<BoundViolation> claim_bound_check(const ThresholdModel& model, const ScoreTable& table,
                                              double q, double alpha, int m) {
  std::vector<BoundViolation> out;
  if (table.empty()) return out;
  const double n = static_cast<double>(table.size());
  for (const CellRow& cell : cell_coverage_table(model, table, m)) {
    const double mass = static_cast<double>(cell.count) / n;
    const double dev = std::abs(cell.coverage - q);
    // Same comparison as mass * dev^2 > alpha, the form the fit halts on.
    if (mass * dev * dev > alpha) out.push_back({cell.group, cell.v, dev, std::sqrt(alpha / mass)});
  }
  return out;
}

SetWidths mean_set_width(const ThresholdModel& model, const ScoreTable& table) {
  SetWidths out;
  auto f = thresholds(model, table);
  const bool in_units = table.kind() == ScoreKind::AbsResidual && table.scale().has_value();
  out.unitless = !in_units;
  std::vector<double> values(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (in_units) {
      const Scale& sc = *table.scale();
      // Back to original units for |pred - y| <= radius; an empty set has width 0.
      values[i] = std::max(0.0, 2.0 * (f[i] * (sc.hi - sc.lo) + sc.lo));
    } else {
      values[i] = f[i];
    }
  }
  out.per_group.resize(table.num_groups());
  std::vector<double> selected;
  for (std::size_t g = 0; g < table.num_groups(); ++g) {
    selected.clear();
    auto col = table.group_column(g);
    for (std::size_t i = 0; i < f.size(); ++i)
      if (col[i]) selected.push_back(values[i]);
    if (selected.empty()) continue;
    out.per_group[g] = pairwise_sum(selected) / static_cast<double>(selected.size());
  }
  return out;
}

double generalization_alpha_prime(double alpha, double rho, double T, double n,
                                  double num_groups, double delta) {
  if (!(alpha > 0 && rho > 0 && T > 0 && n > 0 && num_groups > 0))
    throw std::invalid_argument("alpha, rho, T, n and |G| must be positive");
  if (!(delta > 0 && delta < 1)) throw std::invalid_argument("delta must lie in (0,1)");
  const double pi = std::numbers::pi;
  const double round_term = 4.0 * pi * pi * T * T / (3.0 * delta);
  const double model_term = std::pow(rho, 4) * num_groups / (alpha * alpha);
  if (!(round_term > 0 && model_term > 0)) throw std::domain_error("nonpositive log argument");
  const double log_count = std::log(round_term) + T * std::log(model_term);
  if (log_count < 0) throw std::domain_error("log term is negative; bound undefined");
  return alpha + 21.0 * std::sqrt(3.0 * rho * rho * log_count / (2.0 * alpha * n)) +
         12.0 * rho * rho * log_count / (alpha * n);
}

EvalReport evaluate_model(const ThresholdModel& model, const ScoreTable& table,
                          const FitMetadata& meta) {
  if (table.empty()) throw EmptySelectionError("evaluation table is empty");
  EvalReport report;
  report.meta = meta;
  report.rows = table.size();
  report.clamped = table.clamped();

  auto sets = level_sets(model, table, meta.m);
  report.meta.m = sets.m;
  CellStats stats(table, sets.levels, sets.thresholds, sets.m);
  report.marginal_coverage = coverage_rate(sets.thresholds, table.scores());
  auto widths = mean_set_width(model, table);
  report.width_unitless = widths.unitless;
  const double n = static_cast<double>(table.size());

  std::vector<double> selected;
  for (std::size_t g = 0; g < table.num_groups(); ++g) {
    GroupReport gr;
    gr.name = table.groups().name(g);
    gr.n = stats.group_rows(g);
    if (gr.n > 0) {
      gr.coverage = coverage_rate(sets.thresholds, table.scores(), table.group_column(g));
      gr.q_value = stats.calibration_error(g, meta.q);
      gr.weighted_q = *gr.q_value * (static_cast<double>(gr.n) / n);
      selected.clear();
      auto col = table.group_column(g);
      for (std::size_t i = 0; i < table.size(); ++i)
        if (col[i]) selected.push_back(sets.thresholds[i]);
      gr.mean_threshold = pairwise_sum(selected) / static_cast<double>(selected.size());
      gr.mean_width = widths.per_group[g];
    }
    report.groups.push_back(std::move(gr));
  }
  report.cells = cell_coverage_table(model, table, sets.m);
  if (meta.alpha > 0) report.violations = claim_bound_check(model, table, meta.q, meta.alpha, sets.m);
  return report;
}

}  // namespace mvcp
