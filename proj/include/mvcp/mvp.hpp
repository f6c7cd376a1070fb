#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvcp/core.hpp"

namespace mvcp {

/**
 * Counts per (group, grid level) cell: how many rows of the group sit at the
 * level and how many of those are covered (score <= threshold). For bucketed
 * models the threshold of a row is exactly level/m; for other models the
 * level is the rounded threshold and coverage uses the raw threshold.
 */
class CellStats {
 public:
  CellStats(const ScoreTable& table, std::span<const int> levels,
            std::span<const double> thresholds, int m);
  CellStats(const ScoreTable& table, std::span<const int> levels, int m);

  int m() const { return m_; }
  std::size_t rows() const { return rows_; }
  std::size_t num_groups() const { return num_groups_; }
  std::size_t count(std::size_t g, int level) const { return count_[slot(g, level)]; }
  std::size_t covered(std::size_t g, int level) const { return covered_[slot(g, level)]; }
  std::size_t group_rows(std::size_t g) const { return group_rows_[g]; }

  // Pr[f=v, g] * (q - Pr[s <= f | f=v, g])^2, zero for empty cells.
  double cell_error(std::size_t g, int level, double q) const;
  // Q(f,g): sum over levels of Pr[f=v | g] * (q - cell coverage)^2.
  double calibration_error(std::size_t g, double q) const;

 private:
  std::size_t slot(std::size_t g, int level) const {
    return g * static_cast<std::size_t>(m_ + 1) + static_cast<std::size_t>(level);
  }
  int m_;
  std::size_t rows_;
  std::size_t num_groups_;
  std::vector<std::size_t> count_;
  std::vector<std::size_t> covered_;
  std::vector<std::size_t> group_rows_;
};

struct CellChoice {
  int group = 0;
  int level = 0;
  double v = 0.0;
  double error = 0.0;
};

double cell_error(const ScoreTable& table, const BucketedModel& model, std::size_t g, double v,
                  double q);

// Ties go to the lowest group index, then the lowest level.
CellChoice worst_cell(const CellStats& stats, double q);
CellChoice worst_cell(const ScoreTable& table, const BucketedModel& model, double q);

/// Grid shift (in steps of 1/m) minimizing the cell-restricted pinball loss
/// over every shift that keeps the cell inside [0,1]. Ties prefer the
/// smaller |shift|, then the negative one.
int best_patch_shift(const ScoreTable& table, std::span<const int> levels, int m,
                     std::size_t g, int level, double q);
double best_patch_delta(const ScoreTable& table, const BucketedModel& model, std::size_t g,
                        double v, double q);

struct MulticalibrationCheck {
  bool pass = true;
  std::vector<double> q_values;  // Q(f,g); 0 for skipped groups
  std::vector<double> weighted;  // Pr[g] * Q(f,g)
  std::vector<std::size_t> skipped;
  std::vector<std::string> warnings;
};

MulticalibrationCheck multicalibration_check(const CellStats& stats, const GroupCollection& groups,
                                             double q, double alpha);
MulticalibrationCheck multicalibration_check(const ScoreTable& table, const BucketedModel& model,
                                             double q, double alpha);

enum class HaltReason { Multicalibrated, MaxIters, Stalled };
std::string to_string(HaltReason reason);

struct MvpIteration {
  int t = 0;
  int group = 0;
  double v = 0.0;
  double mass = 0.0;
  double cell_error = 0.0;
  double delta = 0.0;
  double pinball = 0.0;  // mean pinball loss after the patch
  int skipped_cells = 0;  // worse cells passed over for lack of descent
};

struct FitTrace {
  std::vector<MvpIteration> iterations;
  HaltReason halting = HaltReason::MaxIters;
  double initial_pinball = 0.0;
  std::vector<std::string> events;

  std::size_t rounds() const { return iterations.size(); }
};

struct MvpFit {
  BucketedModel model;
  FitTrace trace;
};

MvpFit fit_mvp(const ScoreTable& table, const BaseThreshold& f0, const CalibConfig& config);

}  // namespace mvcp
