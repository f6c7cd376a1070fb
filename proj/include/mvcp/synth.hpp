#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mvcp/core.hpp"

namespace mvcp {

// Linear regression with group-dependent label noise: 10 binary and 90
// Gaussian features, y = <theta, x> + N(0, sigma2_base + sum_i sigma2_i x_i).
struct LinearNoiseConfig {
  std::size_t n_train = 5000;
  std::size_t n_calib = 15000;
  std::size_t n_test = 20000;
  std::size_t num_binary = 10;
  std::size_t num_continuous = 90;
  double sigma_x = 1.0;
  double sigma2_base = 1.0;
  // Empty: sigma2_i = i for i = 1..num_binary.
  std::vector<double> sigma2_binary;
  double jitter_eps = 1e-6;
  std::uint64_t seed = 0;

  std::size_t n_total() const { return n_train + n_calib + n_test; }
  std::vector<double> binary_noise() const;
};

struct RegressionSplit {
  std::vector<double> pred;
  std::vector<double> label;
};

struct LinearNoiseData {
  ScoreTable calib;
  ScoreTable test;
  // Unnormalized predictions and labels behind the scores.
  RegressionSplit calib_raw;
  RegressionSplit test_raw;
  std::vector<double> theta;
  std::vector<double> ols_coef;  // intercept first
};

/**
 * Draws the dataset, fits least squares on the training split and scores
 * calibration and test rows by |prediction - y|. Groups g_1..g_{2k}: g_j
 * holds rows whose binary feature floor((j+1)/2) has parity j+1, so
 * g_{2i-1} = {x_i = 0} and g_{2i} = {x_i = 1}.
 */
LinearNoiseData gen_linear_group_noise(const LinearNoiseConfig& config);

struct DivisibleConfig {
  std::size_t n = 10000;
  std::int64_t x_max = 5000;  // x uniform on [1, x_max)
  std::size_t num_groups = 15;
  double calib_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct DivisibleData {
  ScoreTable calib;
  ScoreTable test;
  std::vector<std::int64_t> calib_x;
  std::vector<std::int64_t> test_x;
};

// g_j = multiples of j; the label |y'|/(|y'|+1) with y' ~ N(0, #groups of x)
// is used directly as the score.
DivisibleData gen_divisible_task(const DivisibleConfig& config);

}  // namespace mvcp
