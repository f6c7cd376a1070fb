#pragma once

#include <string>
#include <vector>

#include "mvcp/core.hpp"
#include "mvcp/io.hpp"
#include "mvcp/metrics.hpp"

namespace mvcp {

inline const std::vector<std::string> kMethods = {"naive", "conservative", "gcp", "mvp"};

struct FitOptions {
  std::string method = "mvp";
  CalibConfig config;
  QuantileRule rule = QuantileRule::Conservative;  // baselines only
};

struct FitOutcome {
  ModelFile file;
  // False when GCP stopped short of tol or MVP halted without being
  // multicalibrated. Baselines always converge.
  bool converged = true;
  std::vector<std::string> warnings;
};

// f0 is the table's base column when it has one, else the constant 0.
BaseThreshold default_base(const ScoreTable& table);

FitOutcome fit_method(const ScoreTable& calib, const FitOptions& options);

FitMetadata metadata_of(const ModelFile& file);

struct Comparison {
  std::vector<FitOutcome> fits;  // in kMethods order
  std::vector<EvalReport> reports;
};

Comparison compare_methods(const Dataset& data, const CalibConfig& config,
                           QuantileRule rule = QuantileRule::Conservative);

// report.json, coverage.csv and cells.csv under dir.
void write_comparison(const Comparison& cmp, const std::string& dir);

}  // namespace mvcp
