#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvcp/core.hpp"

namespace mvcp {

// Split conformal: one threshold, the empirical q-quantile of all scores.
ConstantModel fit_naive(const ScoreTable& table, double q,
                        QuantileRule rule = QuantileRule::Conservative);

struct ConservativeFit {
  ConservativeModel model;
  std::vector<std::string> warnings;
};

/**
 * Per-group split-conformal thresholds; a row is assigned the largest
 * threshold among its groups. Empty groups and rows in no group use the
 * marginal threshold.
 */
ConservativeFit fit_conservative(const ScoreTable& table, double q,
                                 QuantileRule rule = QuantileRule::Conservative);

double predict_conservative(const ConservativeModel& model, std::span<const std::uint8_t> membership);

}  // namespace mvcp
