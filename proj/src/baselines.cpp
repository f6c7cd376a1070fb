#include "mvcp/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "mvcp/error.hpp"

namespace mvcp {

ConstantModel fit_naive(const ScoreTable& table, double q, QuantileRule rule) {
  if (table.empty()) throw EmptySelectionError("calibration table is empty");
  return {empirical_quantile(table.scores(), q, rule)};
}

ConservativeFit fit_conservative(const ScoreTable& table, double q, QuantileRule rule) {
  if (table.empty()) throw EmptySelectionError("calibration table is empty");
  ConservativeFit fit;
  fit.model.marginal_tau = empirical_quantile(table.scores(), q, rule);
  fit.model.group_tau.resize(table.num_groups());
  std::vector<double> scores;
  for (std::size_t g = 0; g < table.num_groups(); ++g) {
    scores.clear();
    auto col = table.group_column(g);
    for (std::size_t i = 0; i < table.size(); ++i)
      if (col[i]) scores.push_back(table.score(i));
    if (scores.empty()) {
      fit.model.group_tau[g] = fit.model.marginal_tau;
      fit.warnings.push_back("group " + table.groups().name(g) +
                             " has no calibration rows; using the marginal threshold");
      continue;
    }
    fit.model.group_tau[g] = empirical_quantile(scores, q, rule);
  }
  return fit;
}

double predict_conservative(const ConservativeModel& model, std::span<const std::uint8_t> membership) {
  if (membership.size() != model.group_tau.size())
    throw std::invalid_argument("membership length does not match group count");
  bool any = false;
  double tau = 0.0;
  for (std::size_t g = 0; g < membership.size(); ++g) {
    if (!membership[g]) continue;
    tau = any ? std::max(tau, model.group_tau[g]) : model.group_tau[g];
    any = true;
  }
  return any ? tau : model.marginal_tau;
}

}  // namespace mvcp
