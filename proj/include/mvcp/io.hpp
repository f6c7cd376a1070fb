#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvcp/core.hpp"
#include "mvcp/metrics.hpp"
#include "mvcp/mvp.hpp"
#include "mvcp/synth.hpp"

namespace mvcp {

// ---------------------------------------------------------------------------
// Datasets (CSV)
//
//   score | pred,label     nonconformity score, or |pred - label|
//   group:<name>           0/1 membership, zero or more
//   split                  optional, calib | test
//   base                   optional per-row initial threshold in [0,1]
// ---------------------------------------------------------------------------

struct ReadOptions {
  std::optional<Scale> bounds;  // unset: min/max of the file's scores
  double jitter_eps = 1e-6;
  std::uint64_t seed = 0;
  double calib_fraction = 0.5;  // used only without a split column
};

struct Dataset {
  ScoreTable calib;
  ScoreTable test;
  bool has_split_column = false;
};

Dataset parse_dataset(std::istream& in, const ReadOptions& options,
                      const std::string& source = "<stream>");
Dataset read_dataset(const std::string& path, const ReadOptions& options);

void write_score_csv(std::ostream& out, const ScoreTable& calib, const ScoreTable& test);
void write_regression_csv(std::ostream& out, const LinearNoiseData& data);

// ---------------------------------------------------------------------------
// Models and reports (JSON)
// ---------------------------------------------------------------------------

struct ModelFile {
  ThresholdModel model;
  std::string method;
  std::vector<std::string> groups;
  double q = 0.9;
  double alpha = 0.0;
  int m = 0;
  std::uint64_t seed = 0;
  std::optional<Scale> scale;
  std::optional<int> rounds;
  std::optional<std::string> halting;
  std::optional<bool> converged;
  std::vector<MvpIteration> iterations;
};

nlohmann::json model_to_json(const ModelFile& file);
// Throws SchemaError on malformed files, including patches off the 1/m grid.
ModelFile model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const ModelFile& file);
ModelFile load_model(const std::string& path);

// Reorders the table's group columns to the model's group list.
ScoreTable align_groups(const ScoreTable& table, const std::vector<std::string>& names);

nlohmann::json report_to_json(const EvalReport& report);

std::string format_double(double value);
void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace mvcp
