#include "mvcp/io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

#include "mvcp/error.hpp"

namespace mvcp {

namespace {

using nlohmann::json;

constexpr std::string_view kGroupPrefix = "group:";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string where(const std::string& source, std::size_t line, std::string_view column) {
  return source + ": line " + std::to_string(line) + ", column '" + std::string(column) + "'";
}

double parse_real(std::string_view field, const std::string& context) {
  std::string text(field);
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(value))
    throw SchemaError(context + ": '" + text + "' is not a finite number");
  return value;
}

json scale_json(const std::optional<Scale>& scale) {
  if (!scale) return nullptr;
  return {{"lo", scale->lo}, {"hi", scale->hi}};
}

json base_json(const BaseThreshold& base) {
  if (base.is_per_row()) return {{"kind", "per_row"}};
  return {{"kind", "scalar"}, {"value", base.value()}};
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw SchemaError(std::string("model file is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file field '") + key + "': " + e.what());
  }
}

BaseThreshold parse_base(const json& j) {
  const auto kind = field<std::string>(j, "kind");
  if (kind == "per_row") return BaseThreshold::per_row();
  if (kind == "scalar") return BaseThreshold::constant(field<double>(j, "value"));
  throw SchemaError("unknown base kind '" + kind + "'");
}

int on_grid(double value, int m, const std::string& what) {
  try {
    return grid_index_of(value, m);
  } catch (const std::invalid_argument&) {
    throw SchemaError(what + " " + format_double(value) + " is not on the 1/" + std::to_string(m) +
                      " grid");
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

Dataset parse_dataset(std::istream& in, const ReadOptions& options, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    for (auto f : split_fields(line)) header.emplace_back(f);
    break;
  }
  if (header.empty()) throw SchemaError(source + ": missing header");

  std::optional<std::size_t> score_col, pred_col, label_col, split_col, base_col;
  std::vector<std::size_t> group_cols;
  std::vector<std::string> group_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    auto claim = [&](std::optional<std::size_t>& slot) {
      if (slot) throw SchemaError(source + ": duplicate column '" + h + "'");
      slot = c;
    };
    if (h == "score") claim(score_col);
    else if (h == "pred") claim(pred_col);
    else if (h == "label") claim(label_col);
    else if (h == "split") claim(split_col);
    else if (h == "base") claim(base_col);
    else if (h.starts_with(kGroupPrefix)) {
      const std::string name = h.substr(kGroupPrefix.size());
      if (name.empty()) throw SchemaError(source + ": group column with empty name");
      if (std::find(group_names.begin(), group_names.end(), name) != group_names.end())
        throw SchemaError(source + ": duplicate group column '" + h + "'");
      group_cols.push_back(c);
      group_names.push_back(name);
    }
  }
  const bool residual = !score_col && pred_col && label_col;
  if (!score_col && !residual)
    throw SchemaError(source + ": need a 'score' column or both 'pred' and 'label'");
  if (score_col && (pred_col || label_col))
    throw SchemaError(source + ": give either 'score' or 'pred'/'label', not both");

  std::vector<double> raw, base;
  std::vector<std::vector<std::uint8_t>> columns(group_cols.size());
  std::vector<std::uint8_t> is_test;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw SchemaError(source + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
    if (residual) {
      const double pred = parse_real(fields[*pred_col], where(source, line_no, "pred"));
      const double label = parse_real(fields[*label_col], where(source, line_no, "label"));
      raw.push_back(std::abs(pred - label));
    } else {
      raw.push_back(parse_real(fields[*score_col], where(source, line_no, "score")));
    }
    for (std::size_t k = 0; k < group_cols.size(); ++k) {
      const auto v = fields[group_cols[k]];
      if (v != "0" && v != "1")
        throw SchemaError(where(source, line_no, header[group_cols[k]]) + ": group value '" +
                          std::string(v) + "' must be 0 or 1");
      columns[k].push_back(v == "1");
    }
    if (split_col) {
      const auto v = fields[*split_col];
      if (v != "calib" && v != "test")
        throw SchemaError(where(source, line_no, "split") + ": '" + std::string(v) +
                          "' must be calib or test");
      is_test.push_back(v == "test");
    }
    if (base_col) {
      const double b = parse_real(fields[*base_col], where(source, line_no, "base"));
      if (b < 0.0 || b > 1.0)
        throw SchemaError(where(source, line_no, "base") + ": base threshold must lie in [0,1]");
      base.push_back(b);
    }
  }
  if (raw.empty()) throw SchemaError(source + ": no data rows");

  NormalizedScores norm;
  try {
    norm = normalize_and_jitter(raw, options.jitter_eps, derive_seed(options.seed, "read"),
                                options.bounds);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(source + ": " + e.what());
  }

  const std::size_t n = raw.size();
  std::vector<std::uint8_t> membership;
  membership.reserve(n * columns.size());
  for (const auto& col : columns) membership.insert(membership.end(), col.begin(), col.end());
  TableInfo info;
  info.scale = norm.scale;
  info.kind = residual ? ScoreKind::AbsResidual : ScoreKind::Generic;
  info.clamped = norm.clamped;
  if (base_col) info.base = std::move(base);
  ScoreTable all(std::move(norm.scores), GroupCollection(group_names), std::move(membership),
                 std::move(info));

  std::vector<std::size_t> calib_rows, test_rows;
  if (split_col) {
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test_rows : calib_rows).push_back(i);
  } else {
    if (!(options.calib_fraction > 0 && options.calib_fraction <= 1))
      throw std::invalid_argument("calib_fraction must lie in (0,1]");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(options.seed, "split"));
    std::shuffle(order.begin(), order.end(), rng);
    const auto k = static_cast<std::size_t>(std::llround(options.calib_fraction * n));
    calib_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(calib_rows.begin(), calib_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
  }
  Dataset out;
  out.has_split_column = split_col.has_value();
  out.calib = all.subset(calib_rows);
  out.test = all.subset(test_rows);
  return out;
}

Dataset read_dataset(const std::string& path, const ReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open dataset " + path);
  return parse_dataset(in, options, path);
}

void write_score_csv(std::ostream& out, const ScoreTable& calib, const ScoreTable& test) {
  out << "score";
  for (const auto& name : calib.groups().names()) out << ",group:" << name;
  out << ",split\n";
  auto rows = [&](const ScoreTable& t, const char* split) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << format_double(t.score(i));
      for (std::size_t g = 0; g < t.num_groups(); ++g) out << ',' << (t.member(i, g) ? '1' : '0');
      out << ',' << split << '\n';
    }
  };
  rows(calib, "calib");
  rows(test, "test");
}

void write_regression_csv(std::ostream& out, const LinearNoiseData& data) {
  out << "pred,label";
  for (const auto& name : data.calib.groups().names()) out << ",group:" << name;
  out << ",split\n";
  auto rows = [&](const ScoreTable& t, const RegressionSplit& raw, const char* split) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << format_double(raw.pred[i]) << ',' << format_double(raw.label[i]);
      for (std::size_t g = 0; g < t.num_groups(); ++g) out << ',' << (t.member(i, g) ? '1' : '0');
      out << ',' << split << '\n';
    }
  };
  rows(data.calib, data.calib_raw, "calib");
  rows(data.test, data.test_raw, "test");
}

nlohmann::json model_to_json(const ModelFile& file) {
  json j;
  j["format"] = "mvcp-model";
  j["version"] = 1;
  j["method"] = file.method;
  j["q"] = file.q;
  j["alpha"] = file.alpha;
  j["m"] = file.m;
  j["seed"] = file.seed;
  j["groups"] = file.groups;
  j["scale"] = scale_json(file.scale);
  std::visit(
      [&](const auto& model) {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, ConstantModel>) {
          j["kind"] = "constant";
          j["tau"] = model.tau;
        } else if constexpr (std::is_same_v<T, GroupLinearModel>) {
          j["kind"] = "group_linear";
          j["base"] = base_json(model.base);
          j["lambda"] = model.lambda;
        } else if constexpr (std::is_same_v<T, BucketedModel>) {
          j["kind"] = "bucketed";
          j["base"] = base_json(model.base);
          j["m"] = model.m;
          json patches = json::array();
          for (const GridPatch& p : model.patches) {
            patches.push_back({{"group", p.group == kMarginal ? json(nullptr) : json(file.groups.at(p.group))},
                               {"v", grid_value(p.level, model.m)},
                               {"delta", grid_value(p.shift, model.m)}});
          }
          j["patches"] = std::move(patches);
        } else {
          j["kind"] = "conservative";
          j["group_tau"] = model.group_tau;
          j["marginal_tau"] = model.marginal_tau;
        }
      },
      file.model);
  json trace = json::object();
  if (file.rounds) trace["T"] = *file.rounds;
  if (file.halting) trace["halting"] = *file.halting;
  if (file.converged) trace["converged"] = *file.converged;
  if (!file.iterations.empty()) {
    json its = json::array();
    for (const MvpIteration& it : file.iterations)
      its.push_back({{"t", it.t},
                     {"group", file.groups.at(it.group)},
                     {"v", it.v},
                     {"mass", it.mass},
                     {"cell_error", it.cell_error},
                     {"delta", it.delta},
                     {"pinball", it.pinball},
                     {"skipped_cells", it.skipped_cells}});
    trace["iterations"] = std::move(its);
  }
  j["trace"] = std::move(trace);
  return j;
}

ModelFile model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("model file is not a JSON object");
  if (j.value("format", "") != "mvcp-model") throw SchemaError("not an mvcp model file");
  ModelFile file;
  file.method = field<std::string>(j, "method");
  file.q = field<double>(j, "q");
  file.alpha = field<double>(j, "alpha");
  file.m = field<int>(j, "m");
  file.seed = field<std::uint64_t>(j, "seed");
  file.groups = field<std::vector<std::string>>(j, "groups");
  try {
    GroupCollection check(file.groups);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("model groups: ") + e.what());
  }
  if (j.contains("scale") && !j["scale"].is_null()) {
    file.scale = Scale{field<double>(j["scale"], "lo"), field<double>(j["scale"], "hi")};
    if (!(file.scale->lo < file.scale->hi)) throw SchemaError("model scale needs lo < hi");
  }
  const auto kind = field<std::string>(j, "kind");
  const std::size_t G = file.groups.size();
  if (kind == "constant") {
    file.model = ConstantModel{field<double>(j, "tau")};
  } else if (kind == "group_linear") {
    GroupLinearModel gl{parse_base(field<json>(j, "base")), field<std::vector<double>>(j, "lambda")};
    if (gl.lambda.size() != G) throw SchemaError("lambda length does not match group list");
    for (double l : gl.lambda)
      if (!std::isfinite(l)) throw SchemaError("lambda entries must be finite");
    file.model = std::move(gl);
  } else if (kind == "bucketed") {
    BucketedModel b;
    b.base = parse_base(field<json>(j, "base"));
    b.m = file.m;
    if (b.m < 2) throw SchemaError("bucketed model needs m >= 2");
    for (const json& p : field<json>(j, "patches")) {
      GridPatch patch;
      const json& g = p.at("group");
      if (g.is_null()) {
        patch.group = kMarginal;
      } else {
        const auto name = g.get<std::string>();
        auto it = std::find(file.groups.begin(), file.groups.end(), name);
        if (it == file.groups.end()) throw SchemaError("patch references unknown group '" + name + "'");
        patch.group = static_cast<int>(it - file.groups.begin());
      }
      patch.level = on_grid(field<double>(p, "v"), b.m, "patch value");
      patch.shift = on_grid(field<double>(p, "delta"), b.m, "patch delta");
      if (patch.level < 0 || patch.level > b.m || patch.level + patch.shift < 0 ||
          patch.level + patch.shift > b.m)
        throw SchemaError("patch moves a threshold outside [0,1]");
      b.patches.push_back(patch);
    }
    file.model = std::move(b);
  } else if (kind == "conservative") {
    ConservativeModel c{field<std::vector<double>>(j, "group_tau"), field<double>(j, "marginal_tau")};
    if (c.group_tau.size() != G) throw SchemaError("group_tau length does not match group list");
    file.model = std::move(c);
  } else {
    throw SchemaError("unknown model kind '" + kind + "'");
  }
  if (j.contains("trace")) {
    const json& t = j["trace"];
    if (t.contains("T")) file.rounds = t["T"].get<int>();
    if (t.contains("halting")) file.halting = t["halting"].get<std::string>();
    if (t.contains("converged")) file.converged = t["converged"].get<bool>();
  }
  return file;
}

void save_model(const std::string& path, const ModelFile& file) { write_json(path, model_to_json(file)); }

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open model file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return model_from_json(j);
}

ScoreTable align_groups(const ScoreTable& table, const std::vector<std::string>& names) {
  std::vector<std::size_t> keep;
  for (const auto& name : names) {
    auto idx = table.groups().index_of(name);
    if (!idx) throw SchemaError("dataset has no column group:" + name);
    keep.push_back(*idx);
  }
  return table.with_groups(keep);
}

nlohmann::json report_to_json(const EvalReport& report) {
  json j;
  json meta = {{"method", report.meta.method},
               {"q", report.meta.q},
               {"alpha", report.meta.alpha},
               {"m", report.meta.m}};
  if (report.meta.rounds) meta["T"] = *report.meta.rounds;
  if (report.meta.halting) meta["halting"] = *report.meta.halting;
  j["fit"] = std::move(meta);
  j["rows"] = report.rows;
  j["marginal_coverage"] = report.marginal_coverage;
  j["width_unitless"] = report.width_unitless;
  j["clamped_scores"] = report.clamped;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json groups = json::array();
  for (const GroupReport& g : report.groups)
    groups.push_back({{"name", g.name},
                      {"n", g.n},
                      {"coverage", opt(g.coverage)},
                      {"Q", opt(g.q_value)},
                      {"weighted_Q", opt(g.weighted_q)},
                      {"mean_threshold", opt(g.mean_threshold)},
                      {"mean_width", opt(g.mean_width)}});
  j["groups"] = std::move(groups);
  json cells = json::array();
  for (const CellRow& c : report.cells)
    cells.push_back({{"group", report.groups.at(c.group).name},
                     {"v", c.v},
                     {"count", c.count},
                     {"coverage", c.coverage}});
  j["cells"] = std::move(cells);
  json violations = json::array();
  for (const BoundViolation& v : report.violations)
    violations.push_back({{"group", report.groups.at(v.group).name},
                          {"v", v.v},
                          {"deviation", v.deviation},
                          {"bound", v.bound}});
  j["bound_violations"] = std::move(violations);
  return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace mvcp
