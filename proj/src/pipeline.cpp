#include "mvcp/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mvcp/baselines.hpp"
#include "mvcp/gcp.hpp"
#include "mvcp/mvp.hpp"

namespace mvcp {

BaseThreshold default_base(const ScoreTable& table) {
  return table.base() ? BaseThreshold::per_row() : BaseThreshold::constant(0.0);
}

FitOutcome fit_method(const ScoreTable& calib, const FitOptions& options) {
  const CalibConfig& cfg = options.config;
  cfg.validate();
  FitOutcome out;
  ModelFile& file = out.file;
  file.method = options.method;
  file.groups = calib.groups().names();
  file.q = cfg.q;
  file.alpha = cfg.alpha;
  file.m = cfg.m;
  file.seed = cfg.seed;
  file.scale = calib.scale();

  if (options.method == "naive") {
    file.model = fit_naive(calib, cfg.q, options.rule);
  } else if (options.method == "conservative") {
    auto fit = fit_conservative(calib, cfg.q, options.rule);
    file.model = std::move(fit.model);
    out.warnings = std::move(fit.warnings);
  } else if (options.method == "gcp") {
    GcpOptions g;
    g.q = cfg.q;
    g.tol = cfg.tol;
    g.max_sweeps = cfg.max_iters;
    auto fit = fit_gcp(calib, default_base(calib), g);
    file.model = std::move(fit.model);
    file.rounds = fit.sweeps;
    file.converged = fit.converged;
    out.converged = fit.converged;
    out.warnings = std::move(fit.warnings);
    if (!fit.converged)
      out.warnings.push_back("gcp reached a pinball-loss minimum outside tol " +
                             format_double(fit.tol));
  } else if (options.method == "mvp") {
    auto fit = fit_mvp(calib, default_base(calib), cfg);
    file.rounds = static_cast<int>(fit.trace.rounds());
    file.halting = to_string(fit.trace.halting);
    file.converged = fit.trace.halting == HaltReason::Multicalibrated;
    file.iterations = fit.trace.iterations;
    file.model = std::move(fit.model);
    out.converged = *file.converged;
    out.warnings = std::move(fit.trace.events);
  } else {
    throw std::invalid_argument("unknown method '" + options.method + "'");
  }
  return out;
}

FitMetadata metadata_of(const ModelFile& file) {
  FitMetadata meta;
  meta.method = file.method;
  meta.q = file.q;
  meta.alpha = file.alpha;
  meta.m = file.m;
  meta.rounds = file.rounds;
  meta.halting = file.halting;
  return meta;
}

Comparison compare_methods(const Dataset& data, const CalibConfig& config, QuantileRule rule) {
  Comparison cmp;
  for (const auto& method : kMethods) {
    FitOptions options{method, config, rule};
    cmp.fits.push_back(fit_method(data.calib, options));
    cmp.reports.push_back(
        evaluate_model(cmp.fits.back().file.model, data.test, metadata_of(cmp.fits.back().file)));
  }
  return cmp;
}

void write_comparison(const Comparison& cmp, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);

  nlohmann::json report;
  for (std::size_t k = 0; k < cmp.reports.size(); ++k) {
    auto entry = report_to_json(cmp.reports[k]);
    entry["converged"] = cmp.fits[k].converged;
    report["methods"][cmp.reports[k].meta.method] = std::move(entry);
  }
  write_json((root / "report.json").string(), report);

  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ofstream cov(root / "coverage.csv");
  cov << "method,group,n,coverage,Q,weighted_Q,mean_threshold,mean_width\n";
  for (const EvalReport& r : cmp.reports) {
    cov << r.meta.method << ",(marginal)," << r.rows << ',' << format_double(r.marginal_coverage)
        << ",,,,\n";
    for (const GroupReport& g : r.groups)
      cov << r.meta.method << ',' << g.name << ',' << g.n << ',' << opt(g.coverage) << ','
          << opt(g.q_value) << ',' << opt(g.weighted_q) << ',' << opt(g.mean_threshold) << ','
          << opt(g.mean_width) << '\n';
  }

  std::ofstream cells(root / "cells.csv");
  cells << "method,group,v,count,coverage\n";
  for (const EvalReport& r : cmp.reports)
    for (const CellRow& c : r.cells)
      cells << r.meta.method << ',' << r.groups.at(c.group).name << ',' << format_double(c.v) << ','
            << c.count << ',' << format_double(c.coverage) << '\n';
  if (!cov || !cells) throw std::runtime_error("failed writing comparison tables to " + dir);
}

}  // namespace mvcp
