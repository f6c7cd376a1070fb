#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace mvcp {

// Group index used by a patch that applies to every row regardless of group.
inline constexpr int kMarginal = -1;

enum class QuantileRule { Plain, Conservative };

// AbsResidual scores are |prediction - label|, which lets reports convert
// thresholds into interval widths.
enum class ScoreKind { Generic, AbsResidual };

struct Scale {
  double lo = 0.0;
  double hi = 1.0;
};

class GroupCollection {
 public:
  GroupCollection() = default;
  explicit GroupCollection(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t g) const { return names_.at(g); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TableInfo {
  std::optional<Scale> scale;
  ScoreKind kind = ScoreKind::Generic;
  // Per-row initial thresholds f0(x), when the data carries them.
  std::optional<std::vector<double>> base;
  // Raw scores that fell outside explicit bounds and were clamped.
  std::size_t clamped = 0;
};

/**
 * Calibration or test rows: one score in [0,1] per row plus a membership
 * bit for every group. Membership is stored column-major so per-group scans
 * are contiguous.
 */
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(std::vector<double> scores, GroupCollection groups,
             std::vector<std::uint8_t> membership, TableInfo info = {});

  std::size_t size() const { return scores_.size(); }
  bool empty() const { return scores_.empty(); }
  std::size_t num_groups() const { return groups_.size(); }
  const GroupCollection& groups() const { return groups_; }

  double score(std::size_t row) const { return scores_[row]; }
  std::span<const double> scores() const { return scores_; }

  bool member(std::size_t row, std::size_t g) const {
    return membership_[g * scores_.size() + row] != 0;
  }
  std::span<const std::uint8_t> group_column(std::size_t g) const {
    return {membership_.data() + g * scores_.size(), scores_.size()};
  }
  std::size_t group_size(std::size_t g) const;

  const std::optional<Scale>& scale() const { return info_.scale; }
  ScoreKind kind() const { return info_.kind; }
  const std::optional<std::vector<double>>& base() const { return info_.base; }
  std::size_t clamped() const { return info_.clamped; }
  const TableInfo& info() const { return info_; }

  ScoreTable subset(std::span<const std::size_t> rows) const;
  ScoreTable with_groups(std::span<const std::size_t> keep) const;

 private:
  std::vector<double> scores_;
  GroupCollection groups_;
  std::vector<std::uint8_t> membership_;
  TableInfo info_;
};

// Initial threshold f0: either one scalar or the table's per-row base column.
class BaseThreshold {
 public:
  BaseThreshold() = default;
  static BaseThreshold constant(double value) { return BaseThreshold(false, value); }
  static BaseThreshold per_row() { return BaseThreshold(true, 0.0); }

  bool is_per_row() const { return per_row_; }
  double value() const { return value_; }
  double at(const ScoreTable& table, std::size_t row) const;

  bool operator==(const BaseThreshold&) const = default;

 private:
  BaseThreshold(bool per_row, double value) : per_row_(per_row), value_(value) {}
  bool per_row_ = false;
  double value_ = 0.0;
};

struct ConstantModel {
  double tau = 0.0;
};

// f(x) = f0(x) + sum_g lambda_g * g(x)
struct GroupLinearModel {
  BaseThreshold base;
  std::vector<double> lambda;
};

// Per-group thresholds combined by max over the groups a row belongs to.
struct ConservativeModel {
  std::vector<double> group_tau;
  double marginal_tau = 0.0;
};

// Rows in `group` (or all rows for kMarginal) currently at grid level
// `level` move to `level + shift`. Levels are integer multiples of 1/m.
struct GridPatch {
  int group = kMarginal;
  int level = 0;
  int shift = 0;

  bool operator==(const GridPatch&) const = default;
};

struct BucketedModel {
  BaseThreshold base;
  int m = 100;
  std::vector<GridPatch> patches;
};

using ThresholdModel =
    std::variant<ConstantModel, GroupLinearModel, BucketedModel, ConservativeModel>;

struct CalibConfig {
  double q = 0.9;
  double alpha = 1e-4;
  int m = 100;
  std::optional<double> tol;  // unset: derived from the smallest group
  int max_iters = 1000;
  double jitter_eps = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

double pinball_loss(double tau, double s, double q);

// Canonical evaluation of a model on every row of a table.
std::vector<double> thresholds(const ThresholdModel& model, const ScoreTable& table);

// Grid level of every row after replaying the patch list.
std::vector<int> grid_levels(const BucketedModel& model, const ScoreTable& table);

double group_linear_value(const GroupLinearModel& model, const ScoreTable& table,
                          std::size_t row);

double mean_pinball(std::span<const double> thresholds, std::span<const double> scores,
                    double q);
double empirical_pinball(const ThresholdModel& model, const ScoreTable& table, double q);

/// Fraction of selected rows with score <= threshold. Ties count as covered.
/// An empty mask means every row.
double coverage_rate(std::span<const double> thresholds, std::span<const double> scores,
                     std::span<const std::uint8_t> mask = {});
double empirical_cdf(const ThresholdModel& model, const ScoreTable& table,
                     std::span<const std::uint8_t> mask = {});

double empirical_quantile(std::span<const double> values, double q, QuantileRule rule);

int round_to_grid_index(double tau, int m);
double round_to_grid(double tau, int m);
inline double grid_value(int level, int m) { return static_cast<double>(level) / m; }
// Exact grid index of a value that must already lie on the grid.
int grid_index_of(double value, int m);

BucketedModel patch(const BucketedModel& model, int group, double v, double delta);

struct NormalizedScores {
  std::vector<double> scores;
  Scale scale;
  std::size_t clamped = 0;
};

/**
 * Affine map of raw scores onto [0,1] followed by seeded uniform(0, eps)
 * jitter. Without explicit bounds the map uses the sample min and max;
 * with bounds, out-of-range values are clamped and counted.
 */
NormalizedScores normalize_and_jitter(std::span<const double> raw, double jitter_eps,
                                      std::uint64_t seed,
                                      std::optional<Scale> bounds = std::nullopt);

// Stable sub-seed for a named consumer of randomness.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

double pairwise_sum(std::span<const double> values);

}  // namespace mvcp
