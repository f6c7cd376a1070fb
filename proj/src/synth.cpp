#include "mvcp/synth.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace mvcp {

namespace {

GroupCollection numbered_groups(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= count; ++j) names.push_back("g" + std::to_string(j));
  return GroupCollection(std::move(names));
}

}  // namespace

std::vector<double> LinearNoiseConfig::binary_noise() const {
  if (!sigma2_binary.empty()) {
    if (sigma2_binary.size() != num_binary)
      throw std::invalid_argument("sigma2_binary must have one entry per binary feature");
    return sigma2_binary;
  }
  std::vector<double> out(num_binary);
  for (std::size_t i = 0; i < num_binary; ++i) out[i] = static_cast<double>(i + 1);
  return out;
}

LinearNoiseData gen_linear_group_noise(const LinearNoiseConfig& config) {
  if (config.n_train == 0 || config.n_calib == 0 || config.n_test == 0)
    throw std::invalid_argument("every split needs at least one row");
  if (config.num_binary == 0) throw std::invalid_argument("need at least one binary feature");
  if (!(config.sigma_x > 0) || !(config.sigma2_base >= 0))
    throw std::invalid_argument("invalid noise parameters");
  const std::vector<double> sigma2 = config.binary_noise();
  for (double v : sigma2)
    if (!(v >= 0)) throw std::invalid_argument("noise variances must be nonnegative");

  const std::size_t nb = config.num_binary;
  const std::size_t dims = nb + config.num_continuous;
  std::mt19937_64 rng(derive_seed(config.seed, "linear-data"));
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  LinearNoiseData data;
  data.theta.resize(dims);
  for (double& t : data.theta) t = std_normal(rng);

  std::vector<double> x(dims);
  auto draw_row = [&]() {
    double noise_var = config.sigma2_base;
    double mean = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      if (d < nb) {
        x[d] = coin(rng) ? 1.0 : 0.0;
        noise_var += sigma2[d] * x[d];
      } else {
        x[d] = config.sigma_x * std_normal(rng);
      }
      mean += data.theta[d] * x[d];
    }
    return mean + std::sqrt(noise_var) * std_normal(rng);
  };

  // Least squares with intercept on the training split via normal equations.
  Eigen::MatrixXd design(config.n_train, dims + 1);
  Eigen::VectorXd target(config.n_train);
  for (std::size_t i = 0; i < config.n_train; ++i) {
    target(i) = draw_row();
    design(i, 0) = 1.0;
    for (std::size_t d = 0; d < dims; ++d) design(i, d + 1) = x[d];
  }
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd rhs = design.transpose() * target;
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
  data.ols_coef.assign(beta.data(), beta.data() + beta.size());

  const std::size_t scored = config.n_calib + config.n_test;
  const std::size_t num_groups = 2 * nb;
  std::vector<double> raw(scored);
  std::vector<std::uint8_t> binary(scored * nb);
  for (std::size_t r = 0; r < scored; ++r) {
    const double y = draw_row();
    double pred = beta(0);
    for (std::size_t d = 0; d < dims; ++d) pred += beta(d + 1) * x[d];
    raw[r] = std::abs(pred - y);
    for (std::size_t b = 0; b < nb; ++b) binary[r * nb + b] = x[b] != 0.0;
    RegressionSplit& split = r < config.n_calib ? data.calib_raw : data.test_raw;
    split.pred.push_back(pred);
    split.label.push_back(y);
  }

  auto normalized = normalize_and_jitter(raw, config.jitter_eps, derive_seed(config.seed, "linear"));
  const GroupCollection groups = numbered_groups(num_groups);

  auto build = [&](std::size_t begin, std::size_t count) {
    std::vector<double> scores(normalized.scores.begin() + static_cast<std::ptrdiff_t>(begin),
                               normalized.scores.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::vector<std::uint8_t> membership(count * num_groups);
    for (std::size_t j = 1; j <= num_groups; ++j) {
      const std::size_t feature = (j + 1) / 2 - 1;
      const std::uint8_t parity = static_cast<std::uint8_t>((j + 1) % 2);
      for (std::size_t r = 0; r < count; ++r)
        membership[(j - 1) * count + r] = binary[(begin + r) * nb + feature] == parity;
    }
    TableInfo info;
    info.scale = normalized.scale;
    info.kind = ScoreKind::AbsResidual;
    return ScoreTable(std::move(scores), groups, std::move(membership), std::move(info));
  };
  data.calib = build(0, config.n_calib);
  data.test = build(config.n_calib, config.n_test);
  return data;
}

DivisibleData gen_divisible_task(const DivisibleConfig& config) {
  if (config.n < 2 || config.x_max < 2 || config.num_groups == 0)
    throw std::invalid_argument("invalid divisible-task configuration");
  if (!(config.calib_fraction > 0 && config.calib_fraction < 1))
    throw std::invalid_argument("calib_fraction must lie in (0,1)");
  std::mt19937_64 rng(derive_seed(config.seed, "divisible-data"));
  std::uniform_int_distribution<std::int64_t> draw_x(1, config.x_max - 1);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  const std::size_t G = config.num_groups;
  std::vector<std::int64_t> xs(config.n);
  std::vector<double> ys(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    xs[i] = draw_x(rng);
    std::size_t count = 0;
    for (std::size_t j = 1; j <= G; ++j)
      if (xs[i] % static_cast<std::int64_t>(j) == 0) ++count;
    double sum = 0.0;
    for (std::size_t k = 0; k < count; ++k) sum += std_normal(rng);
    ys[i] = std::abs(sum) / (std::abs(sum) + 1.0);
  }

  const auto n_calib = static_cast<std::size_t>(std::llround(config.calib_fraction * config.n));
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= G; ++j) names.push_back("div" + std::to_string(j));
  const GroupCollection groups(std::move(names));

  auto build = [&](std::size_t begin, std::size_t count, std::vector<std::int64_t>& x_out) {
    std::vector<double> scores(ys.begin() + static_cast<std::ptrdiff_t>(begin),
                               ys.begin() + static_cast<std::ptrdiff_t>(begin + count));
    x_out.assign(xs.begin() + static_cast<std::ptrdiff_t>(begin),
                 xs.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::vector<std::uint8_t> membership(count * G);
    for (std::size_t j = 1; j <= G; ++j)
      for (std::size_t r = 0; r < count; ++r)
        membership[(j - 1) * count + r] = x_out[r] % static_cast<std::int64_t>(j) == 0;
    TableInfo info;
    info.scale = Scale{0.0, 1.0};
    return ScoreTable(std::move(scores), groups, std::move(membership), std::move(info));
  };
  DivisibleData data;
  data.calib = build(0, n_calib, data.calib_x);
  data.test = build(n_calib, config.n - n_calib, data.test_x);
  return data;
}

}  // namespace mvcp
