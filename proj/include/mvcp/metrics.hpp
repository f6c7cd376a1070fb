#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mvcp/core.hpp"

namespace mvcp {

// Thresholds of a model on a table together with the grid level of each
// row. Bucketed models report their own levels; every other model is
// bucketed by rounding its (clamped) threshold to the 1/m grid.
struct LevelSets {
  std::vector<double> thresholds;
  std::vector<int> levels;
  int m = 0;
};

LevelSets level_sets(const ThresholdModel& model, const ScoreTable& table, int m);

// Per-group coverage; nullopt where the group has no rows in the table.
std::vector<std::optional<double>> group_coverage(const ThresholdModel& model,
                                                  const ScoreTable& table);

double calibration_error_Q(const ThresholdModel& model, const ScoreTable& table, std::size_t g,
                           double q, int m);

struct CellRow {
  std::size_t group = 0;
  int level = 0;
  double v = 0.0;
  std::size_t count = 0;
  double coverage = 0.0;
};

// One row per (group, level) cell with at least one row, ordered by group
// then level.
std::vector<CellRow> cell_coverage_table(const ThresholdModel& model, const ScoreTable& table,
                                         int m);

struct BoundViolation {
  std::size_t group = 0;
  double v = 0.0;
  double deviation = 0.0;  // |cell coverage - q|
  double bound = 0.0;      // sqrt(alpha / Pr[g, f=v])
};

/// Cells whose coverage deviates from q by more than sqrt(alpha / mass).
std::vector<BoundViolation> claim_bound_check(const ThresholdModel& model, const ScoreTable& table,
                                              double q, double alpha, int m);

struct SetWidths {
  // Mean interval width per group in original score units, or the mean
  // normalized threshold when the scores are not absolute residuals.
  std::vector<std::optional<double>> per_group;
  bool unitless = false;
};

SetWidths mean_set_width(const ThresholdModel& model, const ScoreTable& table);

/**
 * Out-of-sample multicalibration level guaranteed for a model found after
 * T rounds on n calibration samples, as a function of the Lipschitz
 * constant rho of the score distribution:
 *
 *   a' = a + 21 sqrt(3 rho^2 L / (2 a n)) + 12 rho^2 L / (a n),
 *   L  = ln(4 pi^2 T^2 / (3 delta)) + T ln(rho^4 |G| / a^2).
 */
double generalization_alpha_prime(double alpha, double rho, double T, double n,
                                  double num_groups, double delta);

struct FitMetadata {
  std::string method;
  double q = 0.9;
  double alpha = 0.0;
  int m = 0;
  std::optional<int> rounds;
  std::optional<std::string> halting;
};

struct GroupReport {
  std::string name;
  std::size_t n = 0;
  std::optional<double> coverage;
  std::optional<double> q_value;
  std::optional<double> weighted_q;
  std::optional<double> mean_threshold;
  std::optional<double> mean_width;
};

struct EvalReport {
  FitMetadata meta;
  std::size_t rows = 0;
  double marginal_coverage = 0.0;
  std::vector<GroupReport> groups;
  std::vector<CellRow> cells;
  std::vector<BoundViolation> violations;
  bool width_unitless = false;
  std::size_t clamped = 0;
};

EvalReport evaluate_model(const ThresholdModel& model, const ScoreTable& table,
                          const FitMetadata& meta);

}  // namespace mvcp
