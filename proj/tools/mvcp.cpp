// mvcp: synthesize benchmark data, fit thresholds, evaluate and compare.
//
// Exit codes: 0 ok, 1 fit did not converge (outputs still written),
// 2 bad input (schema or arguments), 3 internal error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvcp/error.hpp"
#include "mvcp/io.hpp"
#include "mvcp/pipeline.hpp"
#include "mvcp/synth.hpp"

namespace {

constexpr int kNotConverged = 1;
constexpr int kSchema = 2;
constexpr int kInternal = 3;

struct Common {
  double q = 0.9;
  double alpha = 1e-4;
  int m = 100;
  std::uint64_t seed = 0;
  int max_iters = 1000;
  std::optional<double> tol;
  std::string rule = "conservative";
  std::vector<double> bounds;
  double jitter = 1e-6;
  double calib_fraction = 0.5;
  std::string data;

  void add_to(CLI::App* app) {
    app->add_option("--data", data, "input CSV")->required()->check(CLI::ExistingFile);
    app->add_option("--q", q, "target coverage")->capture_default_str();
    app->add_option("--alpha", alpha, "multicalibration tolerance")->capture_default_str();
    app->add_option("--m", m, "grid resolution")->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_option("--max-iters", max_iters, "MVP rounds / GCP sweeps")->capture_default_str();
    app->add_option("--tol", tol, "GCP coverage tolerance (default |G|/n_min)");
    app->add_option("--rule", rule, "baseline quantile rule")
        ->check(CLI::IsMember({"plain", "conservative"}))
        ->capture_default_str();
    app->add_option("--bounds", bounds, "raw score range LO HI (default min/max)")->expected(2);
    app->add_option("--jitter", jitter, "uniform jitter width")->capture_default_str();
    app->add_option("--calib-fraction", calib_fraction,
                    "calibration share when the CSV has no split column")
        ->capture_default_str();
  }

  mvcp::ReadOptions read_options() const {
    mvcp::ReadOptions r;
    if (!bounds.empty()) r.bounds = mvcp::Scale{bounds[0], bounds[1]};
    r.jitter_eps = jitter;
    r.seed = seed;
    r.calib_fraction = calib_fraction;
    return r;
  }

  mvcp::CalibConfig config() const {
    mvcp::CalibConfig c;
    c.q = q;
    c.alpha = alpha;
    c.m = m;
    c.tol = tol;
    c.max_iters = max_iters;
    c.jitter_eps = jitter;
    c.seed = seed;
    return c;
  }

  mvcp::QuantileRule quantile_rule() const {
    return rule == "plain" ? mvcp::QuantileRule::Plain : mvcp::QuantileRule::Conservative;
  }
};

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int run_synth(const std::string& task, std::uint64_t seed, const std::string& out) {
  std::filesystem::create_directories(out);
  const auto path = std::filesystem::path(out) / "data.csv";
  std::ofstream file(path);
  if (task == "linear") {
    mvcp::LinearNoiseConfig cfg;
    cfg.seed = seed;
    mvcp::write_regression_csv(file, mvcp::gen_linear_group_noise(cfg));
  } else {
    mvcp::DivisibleConfig cfg;
    cfg.seed = seed;
    auto data = mvcp::gen_divisible_task(cfg);
    mvcp::write_score_csv(file, data.calib, data.test);
  }
  if (!file) throw std::runtime_error("failed writing " + path.string());
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

int run_calibrate(const Common& c, const std::string& method, const std::string& out) {
  auto data = mvcp::read_dataset(c.data, c.read_options());
  auto outcome = mvcp::fit_method(data.calib, {method, c.config(), c.quantile_rule()});
  warn_all(outcome.warnings);
  mvcp::save_model(out, outcome.file);
  std::cout << method << ": fit on " << data.calib.size() << " rows";
  if (outcome.file.rounds) std::cout << ", T=" << *outcome.file.rounds;
  if (outcome.file.halting) std::cout << ", halting=" << *outcome.file.halting;
  std::cout << '\n';
  if (!outcome.converged) {
    std::cerr << "warning: fit did not converge; model written to " << out << '\n';
    return kNotConverged;
  }
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& out, const std::string& split, double jitter) {
  const auto file = mvcp::load_model(model_path);
  mvcp::ReadOptions r;
  r.seed = file.seed;
  r.jitter_eps = jitter;
  if (file.scale) r.bounds = file.scale;
  auto data = mvcp::read_dataset(data_path, r);
  const mvcp::ScoreTable& chosen = split == "calib" ? data.calib : data.test;
  auto table = mvcp::align_groups(chosen, file.groups);
  auto report = mvcp::evaluate_model(file.model, table, mvcp::metadata_of(file));
  mvcp::write_json(out, mvcp::report_to_json(report));
  std::cout << "marginal coverage " << mvcp::format_double(report.marginal_coverage) << " on "
            << report.rows << " " << split << " rows\n";
  return 0;
}

int run_compare(const Common& c, const std::string& out) {
  auto data = mvcp::read_dataset(c.data, c.read_options());
  auto cmp = mvcp::compare_methods(data, c.config(), c.quantile_rule());
  bool all = true;
  for (std::size_t k = 0; k < cmp.fits.size(); ++k) {
    warn_all(cmp.fits[k].warnings);
    if (!cmp.fits[k].converged) {
      std::cerr << "warning: " << mvcp::kMethods[k] << " did not converge\n";
      all = false;
    }
  }
  mvcp::write_comparison(cmp, out);
  for (const auto& r : cmp.reports)
    std::cout << r.meta.method << ": marginal test coverage "
              << mvcp::format_double(r.marginal_coverage) << '\n';
  return all ? 0 : kNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-conditional and multivalid conformal calibration"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "write a synthetic benchmark dataset");
  std::string task = "linear", synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--task", task)->check(CLI::IsMember({"linear", "divisible"}))->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* calibrate = app.add_subcommand("calibrate", "fit a threshold model");
  Common cal;
  std::string method = "mvp", model_out;
  cal.add_to(calibrate);
  calibrate->add_option("--method", method)
      ->check(CLI::IsMember({"naive", "conservative", "gcp", "mvp"}))
      ->capture_default_str();
  calibrate->add_option("--out", model_out, "model JSON")->required();

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a saved model");
  std::string model_in, eval_data, report_out, split = "test";
  double eval_jitter = 1e-6;
  evaluate->add_option("--model", model_in)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", eval_data)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", report_out, "report JSON")->required();
  evaluate->add_option("--split", split)->check(CLI::IsMember({"calib", "test"}))->capture_default_str();
  evaluate->add_option("--jitter", eval_jitter)->capture_default_str();

  auto* compare = app.add_subcommand("compare", "fit and evaluate all four methods");
  Common cmp;
  std::string compare_out;
  cmp.add_to(compare);
  compare->add_option("--out", compare_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kSchema;
  }

  try {
    if (*synth) return run_synth(task, synth_seed, synth_out);
    if (*calibrate) return run_calibrate(cal, method, model_out);
    if (*evaluate) return run_evaluate(model_in, eval_data, report_out, split, eval_jitter);
    if (*compare) return run_compare(cmp, compare_out);
  } catch (const mvcp::SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSchema;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSchema;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
