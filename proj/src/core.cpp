#include "mvcp/core.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mvcp/error.hpp"

namespace mvcp {

namespace {

constexpr double kRangeSlack = 1e-12;
// Products tau*m that land within this distance of a half-integer are
// treated as exact midpoints.
constexpr double kMidpointSlack = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

GroupCollection::GroupCollection(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t g = 0; g < names_.size(); ++g) {
    if (names_[g].empty()) throw std::invalid_argument("group names must be nonempty");
    if (!index_.emplace(names_[g], g).second)
      throw std::invalid_argument("duplicate group name: " + names_[g]);
  }
}

std::optional<std::size_t> GroupCollection::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ScoreTable::ScoreTable(std::vector<double> scores, GroupCollection groups,
                       std::vector<std::uint8_t> membership, TableInfo info)
    : scores_(std::move(scores)),
      groups_(std::move(groups)),
      membership_(std::move(membership)),
      info_(std::move(info)) {
  if (membership_.size() != scores_.size() * groups_.size())
    throw std::invalid_argument("membership matrix does not match rows x groups");
  for (double s : scores_) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("scores must lie in [0,1]");
  }
  for (auto& bit : membership_) bit = bit ? 1 : 0;
  if (info_.scale && !(info_.scale->lo < info_.scale->hi))
    throw std::invalid_argument("scale requires lo < hi");
  if (info_.base && info_.base->size() != scores_.size())
    throw std::invalid_argument("base column length does not match rows");
}

std::size_t ScoreTable::group_size(std::size_t g) const {
  auto col = group_column(g);
  return static_cast<std::size_t>(std::count(col.begin(), col.end(), std::uint8_t{1}));
}

ScoreTable ScoreTable::subset(std::span<const std::size_t> rows) const {
  const std::size_t n = scores_.size();
  const std::size_t k = rows.size();
  std::vector<double> scores(k);
  std::vector<std::uint8_t> membership(k * groups_.size());
  TableInfo info = info_;
  if (info_.base) info.base.emplace(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t i = rows[j];
    if (i >= n) throw std::out_of_range("subset row out of range");
    scores[j] = scores_[i];
    for (std::size_t g = 0; g < groups_.size(); ++g)
      membership[g * k + j] = membership_[g * n + i];
    if (info_.base) (*info.base)[j] = (*info_.base)[i];
  }
  return ScoreTable(std::move(scores), groups_, std::move(membership), std::move(info));
}

ScoreTable ScoreTable::with_groups(std::span<const std::size_t> keep) const {
  const std::size_t n = scores_.size();
  std::vector<std::string> names;
  std::vector<std::uint8_t> membership;
  membership.reserve(keep.size() * n);
  for (std::size_t g : keep) {
    names.push_back(groups_.name(g));
    auto col = group_column(g);
    membership.insert(membership.end(), col.begin(), col.end());
  }
  return ScoreTable(scores_, GroupCollection(std::move(names)), std::move(membership), info_);
}

double BaseThreshold::at(const ScoreTable& table, std::size_t row) const {
  if (!per_row_) return value_;
  if (!table.base()) throw SchemaError("model uses per-row base thresholds but table has none");
  return (*table.base())[row];
}

void CalibConfig::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("q must lie in (0,1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (m < 2) throw std::invalid_argument("grid resolution m must be at least 2");
  if (tol && !(*tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be nonnegative");
  if (!(jitter_eps >= 0.0)) throw std::invalid_argument("jitter_eps must be nonnegative");
}

double pinball_loss(double tau, double s, double q) {
  return s > tau ? (s - tau) * q : (tau - s) * (1.0 - q);
}

double group_linear_value(const GroupLinearModel& model, const ScoreTable& table,
                          std::size_t row) {
  double f = model.base.at(table, row);
  for (std::size_t g = 0; g < model.lambda.size(); ++g) {
    if (table.member(row, g)) f += model.lambda[g];
  }
  return f;
}

std::vector<int> grid_levels(const BucketedModel& model, const ScoreTable& table) {
  const std::size_t n = table.size();
  std::vector<int> levels(n);
  for (std::size_t i = 0; i < n; ++i) levels[i] = round_to_grid_index(model.base.at(table, i), model.m);
  for (const GridPatch& p : model.patches) {
    if (p.group != kMarginal && static_cast<std::size_t>(p.group) >= table.num_groups())
      throw std::out_of_range("patch references a group the table does not have");
    for (std::size_t i = 0; i < n; ++i) {
      if (levels[i] == p.level && (p.group == kMarginal || table.member(i, p.group)))
        levels[i] += p.shift;
    }
  }
  return levels;
}

std::vector<double> thresholds(const ThresholdModel& model, const ScoreTable& table) {
  const std::size_t n = table.size();
  return std::visit(
      overloaded{
          [&](const ConstantModel& c) { return std::vector<double>(n, c.tau); },
          [&](const GroupLinearModel& gl) {
            if (gl.lambda.size() != table.num_groups())
              throw std::invalid_argument("model and table disagree on group count");
            std::vector<double> out(n);
            for (std::size_t i = 0; i < n; ++i) out[i] = group_linear_value(gl, table, i);
            return out;
          },
          [&](const BucketedModel& b) {
            auto levels = grid_levels(b, table);
            std::vector<double> out(n);
            for (std::size_t i = 0; i < n; ++i) out[i] = grid_value(levels[i], b.m);
            return out;
          },
          [&](const ConservativeModel& c) {
            if (c.group_tau.size() != table.num_groups())
              throw std::invalid_argument("model and table disagree on group count");
            std::vector<double> out(n);
            for (std::size_t i = 0; i < n; ++i) {
              bool any = false;
              double t = 0.0;
              for (std::size_t g = 0; g < c.group_tau.size(); ++g) {
                if (!table.member(i, g)) continue;
                t = any ? std::max(t, c.group_tau[g]) : c.group_tau[g];
                any = true;
              }
              out[i] = any ? t : c.marginal_tau;
            }
            return out;
          },
      },
      model);
}

double mean_pinball(std::span<const double> thresholds, std::span<const double> scores,
                    double q) {
  if (scores.empty()) throw EmptySelectionError("pinball loss of an empty table");
  std::vector<double> losses(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    losses[i] = pinball_loss(thresholds[i], scores[i], q);
  return pairwise_sum(losses) / static_cast<double>(scores.size());
}

double empirical_pinball(const ThresholdModel& model, const ScoreTable& table, double q) {
  if (table.empty()) throw EmptySelectionError("pinball loss of an empty table");
  auto f = thresholds(model, table);
  return mean_pinball(f, table.scores(), q);
}

double coverage_rate(std::span<const double> thresholds, std::span<const double> scores,
                     std::span<const std::uint8_t> mask) {
  std::size_t selected = 0, covered = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    ++selected;
    if (scores[i] <= thresholds[i]) ++covered;
  }
  if (selected == 0) throw EmptySelectionError("coverage over an empty row selection");
  return static_cast<double>(covered) / static_cast<double>(selected);
}

double empirical_cdf(const ThresholdModel& model, const ScoreTable& table,
                     std::span<const std::uint8_t> mask) {
  if (!mask.empty() && mask.size() != table.size())
    throw std::invalid_argument("row mask length does not match table");
  auto f = thresholds(model, table);
  return coverage_rate(f, table.scores(), mask);
}

double empirical_quantile(std::span<const double> values, double q, QuantileRule rule) {
  const std::size_t k = values.size();
  if (k == 0) throw EmptySelectionError("quantile of an empty sample");
  std::size_t index = 0;  // 1-based order statistic
  if (rule == QuantileRule::Plain) {
    index = static_cast<std::size_t>(std::ceil(q * static_cast<double>(k)));
  } else {
    index = static_cast<std::size_t>(std::ceil(q * static_cast<double>(k + 1)));
  }
  index = std::clamp<std::size_t>(index, 1, k);
  std::vector<double> work(values.begin(), values.end());
  auto nth = work.begin() + static_cast<std::ptrdiff_t>(index - 1);
  std::nth_element(work.begin(), nth, work.end());
  return *nth;
}

int round_to_grid_index(double tau, int m) {
  if (m < 1) throw std::invalid_argument("grid resolution must be positive");
  if (!(tau >= -kRangeSlack && tau <= 1.0 + kRangeSlack))
    throw std::invalid_argument("threshold outside [0,1] cannot be rounded to the grid");
  tau = std::clamp(tau, 0.0, 1.0);
  const int level = static_cast<int>(std::floor(tau * m + 0.5 + kMidpointSlack));
  return std::clamp(level, 0, m);
}

double round_to_grid(double tau, int m) { return grid_value(round_to_grid_index(tau, m), m); }

int grid_index_of(double value, int m) {
  const double scaled = value * m;
  const double nearest = std::round(scaled);
  if (!std::isfinite(scaled) || std::abs(scaled - nearest) > 1e-9)
    throw std::invalid_argument("value is not a multiple of 1/m");
  return static_cast<int>(nearest);
}

BucketedModel patch(const BucketedModel& model, int group, double v, double delta) {
  const int level = grid_index_of(v, model.m);
  const int shift = grid_index_of(delta, model.m);
  if (level < 0 || level > model.m) throw std::invalid_argument("patch level outside [0,1]");
  if (level + shift < 0 || level + shift > model.m)
    throw std::invalid_argument("patched value outside [0,1]");
  BucketedModel out = model;
  out.patches.push_back({group, level, shift});
  return out;
}

NormalizedScores normalize_and_jitter(std::span<const double> raw, double jitter_eps,
                                      std::uint64_t seed, std::optional<Scale> bounds) {
  if (raw.empty()) throw EmptySelectionError("no scores to normalize");
  if (!(jitter_eps >= 0.0)) throw std::invalid_argument("jitter_eps must be nonnegative");
  NormalizedScores out;
  if (bounds) {
    if (!(bounds->lo < bounds->hi)) throw std::invalid_argument("explicit bounds need lo < hi");
    out.scale = *bounds;
  } else {
    auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    if (!(*lo < *hi))
      throw std::invalid_argument(
          "all raw scores are equal; supply explicit score bounds to normalize");
    out.scale = {*lo, *hi};
  }
  const double span = out.scale.hi - out.scale.lo;
  std::mt19937_64 rng(derive_seed(seed, "jitter"));
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  out.scores.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i])) throw std::invalid_argument("raw score is not finite");
    double s = (raw[i] - out.scale.lo) / span;
    if (s < 0.0 || s > 1.0) {
      ++out.clamped;
      s = std::clamp(s, 0.0, 1.0);
    }
    if (jitter_eps > 0.0) s = std::clamp(s + jitter_eps * noise(rng), 0.0, 1.0);
    out.scores[i] = s;
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed) ^ h);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace mvcp
