// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Reference computations come from support.hpp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mvcp/baselines.hpp"
#include "mvcp/gcp.hpp"
#include "mvcp/io.hpp"
#include "mvcp/metrics.hpp"
#include "mvcp/mvp.hpp"
#include "mvcp/pipeline.hpp"
#include "mvcp/synth.hpp"
#include "support.hpp"

using namespace mvcp;
namespace fs = std::filesystem;

namespace {

constexpr int kLinearRuns = 50;
constexpr int kDivisibleRuns = 10;
constexpr double kOracleTol = 1e-9;

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

struct Verdict {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& why) {
    if (!cond && ok) detail = "first failure: " + why + "; " + detail;
    ok = ok && cond;
  }
};

// Fits whose halting and fixed-point claims are audited by criteria 3 and 4.
struct MvpRecord {
  const ScoreTable* table;
  BucketedModel model;
  HaltReason halting;
  double alpha, q;
};
struct GcpRecord {
  const ScoreTable* table;
  GcpFit fit;
  double f0, q;
};

std::vector<double> coverage_by_group(const ScoreTable& t, const std::vector<double>& f) {
  std::vector<double> out(t.num_groups(), -1.0);
  for (std::size_t g = 0; g < t.num_groups(); ++g) {
    double n = 0, c = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t.member(i, g)) {
        n += 1;
        c += t.score(i) <= f[i];
      }
    if (n > 0) out[g] = c / n;
  }
  return out;
}

double ref_mean_pinball(const ScoreTable& t, const std::vector<double>& f, double q) {
  double total = 0;
  for (std::size_t i = 0; i < t.size(); ++i) total += testing::pinball(f[i], t.score(i), q);
  return total / static_cast<double>(t.size());
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------

struct LinearResults {
  std::vector<std::vector<double>> cov[4];  // [method][run][group]
  std::vector<double> mean_thr[4];          // [method][run]
  std::vector<int> rounds;
  std::vector<double> seconds;
  std::vector<LinearNoiseData> data;
  std::vector<MvpRecord> mvp;
  std::vector<GcpRecord> gcp;
};

LinearResults run_linear() {
  LinearResults r;
  r.data.reserve(kLinearRuns);
  for (int run = 0; run < kLinearRuns; ++run) {
    LinearNoiseConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(run);
    r.data.push_back(gen_linear_group_noise(cfg));
    const auto& d = r.data.back();
    CalibConfig config;
    config.seed = cfg.seed;
    const auto t0 = std::chrono::steady_clock::now();
    auto cmp = compare_methods(Dataset{d.calib, d.test, true}, config);
    r.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    for (int k = 0; k < 4; ++k) {
      const auto f = thresholds(cmp.fits[k].file.model, d.test);
      r.cov[k].push_back(coverage_by_group(d.test, f));
      r.mean_thr[k].push_back(mean(f));
    }
    const auto& mvp = std::get<BucketedModel>(cmp.fits[3].file.model);
    const auto& halting = *cmp.fits[3].file.halting;
    r.rounds.push_back(*cmp.fits[3].file.rounds);
    r.mvp.push_back({&d.calib, mvp,
                     halting == "multicalibrated" ? HaltReason::Multicalibrated
                     : halting == "stalled"       ? HaltReason::Stalled
                                                  : HaltReason::MaxIters,
                     config.alpha, config.q});
    GcpOptions o;
    r.gcp.push_back({&d.calib, fit_gcp(d.calib, BaseThreshold::constant(0.0), o), 0.0, o.q});
  }
  return r;
}

Verdict criterion1(const LinearResults& r) {
  Verdict v;
  const std::size_t G = 20;
  auto avg = [&](int k, std::size_t g) {
    double s = 0;
    for (const auto& run : r.cov[k]) s += run[g];
    return s / static_cast<double>(r.cov[k].size());
  };
  double gcp_dev = 0, mvp_dev = 0, cons_min = 1;
  for (std::size_t g = 0; g < G; ++g) {
    gcp_dev = std::max(gcp_dev, std::abs(avg(2, g) - 0.9));
    mvp_dev = std::max(mvp_dev, std::abs(avg(3, g) - 0.9));
    cons_min = std::min(cons_min, avg(1, g));
  }
  const double naive_hi = avg(0, 19), naive_lo = avg(0, 18);  // g20: x10 = 1, g19: x10 = 0
  const double cons_thr = mean(r.mean_thr[1]), gcp_thr = mean(r.mean_thr[2]);
  const double slowest = *std::max_element(r.seconds.begin(), r.seconds.end());
  v.require(gcp_dev <= 0.02, "gcp group coverage off by " + fmt(gcp_dev));
  v.require(mvp_dev <= 0.02, "mvp group coverage off by " + fmt(mvp_dev));
  v.require(naive_hi <= 0.9 - 0.005, "naive g20 coverage " + fmt(naive_hi));
  v.require(naive_lo >= 0.9 + 0.005, "naive g19 coverage " + fmt(naive_lo));
  v.require(cons_min >= 0.895, "conservative min group coverage " + fmt(cons_min));
  v.require(cons_thr > gcp_thr, "conservative mean threshold not above gcp");
  v.require(slowest <= 60.0, "run took " + fmt(slowest) + " s");
  v.detail += std::to_string(kLinearRuns) + " runs; max |cov-0.9| gcp " + fmt(gcp_dev) + ", mvp " +
              fmt(mvp_dev) + "; naive g20 " + fmt(naive_hi) + ", g19 " + fmt(naive_lo) +
              "; conservative min " + fmt(cons_min) + ", mean threshold " + fmt(cons_thr) + " vs gcp " +
              fmt(gcp_thr) + "; slowest run " + fmt(slowest, 3) + " s";
  return v;
}

Verdict criterion2(const LinearResults& r) {
  Verdict v;
  const int worst = *std::max_element(r.rounds.begin(), r.rounds.end());
  double m = 0, sq = 0;
  for (int t : r.rounds) m += t;
  m /= static_cast<double>(r.rounds.size());
  for (int t : r.rounds) sq += (t - m) * (t - m);
  const double sd = std::sqrt(sq / static_cast<double>(r.rounds.size() - 1));
  v.require(worst <= 200, "a run took T = " + std::to_string(worst));
  v.require(m >= 20 && m <= 80, "mean T = " + fmt(m));
  v.detail += "mean T " + fmt(m) + " +- " + fmt(sd) + ", max " + std::to_string(worst);
  return v;
}

Verdict criterion3(const std::vector<MvpRecord>& fits) {
  Verdict v;
  int audited = 0;
  double worst_ratio = 0;
  for (const auto& rec : fits) {
    if (rec.halting != HaltReason::Multicalibrated) continue;
    ++audited;
    const auto& t = *rec.table;
    const auto levels = testing::ref_levels(rec.model, t);
    std::vector<double> thr(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) thr[i] = static_cast<double>(levels[i]) / rec.model.m;
    for (std::size_t g = 0; g < t.num_groups(); ++g) {
      const double ng = static_cast<double>(t.group_size(g));
      if (ng == 0) continue;
      const double weighted = ng / static_cast<double>(t.size()) *
                              testing::ref_Q(t, levels, thr, rec.model.m, g, rec.q);
      worst_ratio = std::max(worst_ratio, weighted / rec.alpha);
      v.require(weighted <= rec.alpha, "Pr[g]Q = " + fmt(weighted, 6) + " > alpha");
    }
    v.require(claim_bound_check(rec.model, t, rec.q, rec.alpha, rec.model.m).empty(),
              "claim bound violation on a calibration table");
  }
  v.require(audited > 0, "no multicalibrated fits");
  v.detail += std::to_string(audited) + " multicalibrated fits of " + std::to_string(fits.size()) +
              "; max Pr[g]Q/alpha " + fmt(worst_ratio);
  return v;
}

Verdict criterion4(const std::vector<GcpRecord>& fits) {
  Verdict v;
  int audited = 0;
  double worst = 0;
  for (const auto& rec : fits) {
    const auto& t = *rec.table;
    const auto f = thresholds(rec.fit.model, t);
    const std::vector<double> f0(t.size(), rec.f0);
    v.require(ref_mean_pinball(t, f, rec.q) <= ref_mean_pinball(t, f0, rec.q),
              "pinball above that of f0");
    if (!rec.fit.converged) continue;
    ++audited;
    const auto cov = coverage_by_group(t, f);
    for (double c : cov) {
      if (c < 0) continue;
      worst = std::max(worst, std::abs(c - rec.q) / rec.fit.tol);
      v.require(std::abs(c - rec.q) <= rec.fit.tol, "group error above tol");
    }
  }
  v.require(audited > 0, "no converged fits");
  v.detail += std::to_string(audited) + " converged of " + std::to_string(fits.size()) +
              " fits; max |cov-q|/tol " + fmt(worst);
  return v;
}

Verdict criterion5() {
  Verdict v;
  testing::Gen gen(505);
  int iterations = 0, steps = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t G = static_cast<std::size_t>(gen.integer(1, 4));
    auto t = gen.table(static_cast<std::size_t>(gen.integer(5, 200)), G, gen.uniform(0.2, 0.8),
                       gen.coin(0.3) ? 40 : 0);
    const double q = gen.uniform(0.1, 0.95);

    CalibConfig cfg;
    cfg.q = q;
    cfg.m = gen.integer(2, 30);
    cfg.alpha = std::pow(10.0, gen.uniform(-4, -2));
    const double c0 = gen.integer(0, cfg.m) / static_cast<double>(cfg.m);
    auto fit = fit_mvp(t, BaseThreshold::constant(c0), cfg);
    BucketedModel replay{BaseThreshold::constant(c0), cfg.m, {}};
    auto levels = testing::ref_levels(replay, t);
    auto loss_of = [&](const std::vector<int>& lv) {
      std::vector<double> f(lv.size());
      for (std::size_t i = 0; i < lv.size(); ++i) f[i] = static_cast<double>(lv[i]) / cfg.m;
      return ref_mean_pinball(t, f, q);
    };
    double prev = loss_of(levels);
    for (std::size_t r = 0; r < fit.model.patches.size(); ++r) {
      replay.patches.push_back(fit.model.patches[r]);
      const double cur = loss_of(testing::ref_levels(replay, t));
      v.require(cur < prev - 1e-12, "mvp round did not decrease loss by 1e-12");
      prev = cur;
      ++iterations;
    }

    GcpOptions o;
    o.q = q;
    auto g = fit_gcp(t, BaseThreshold::constant(gen.uniform(0, 0.5)), o);
    double last = g.initial_pinball;
    for (double l : g.step_losses) {
      v.require(l <= last, "gcp step increased loss");
      last = l;
      ++steps;
    }
  }
  v.detail += "100 tables; " + std::to_string(iterations) + " mvp rounds, " + std::to_string(steps) +
              " gcp steps";
  return v;
}

Verdict criterion6() {
  Verdict v;
  testing::Gen gen(606);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = static_cast<std::size_t>(gen.integer(1, 50));
    const std::size_t G = static_cast<std::size_t>(gen.integer(1, 3));
    const int m = gen.integer(2, 5);
    auto t = gen.table(n, G, gen.uniform(0.2, 0.9), gen.coin() ? 2 * m : 0);
    const double q = gen.uniform(0.05, 0.95);
    auto model = gen.bucketed(t, m, gen.integer(0, 4));
    const auto levels = testing::ref_levels(model, t);

    const auto got = worst_cell(t, model, q);
    const auto want = testing::ref_worst_cell(t, levels, m, q);
    worst = std::max(worst, std::abs(got.error - want.error));
    v.require(std::abs(got.error - want.error) <= kOracleTol, "worst_cell error");
    v.require(want.error == 0 || (got.group == want.group && got.level == want.level),
              "worst_cell location");

    // best shift at a random occupied cell
    const std::size_t row = static_cast<std::size_t>(gen.integer(0, static_cast<int>(n) - 1));
    std::size_t g = static_cast<std::size_t>(gen.integer(0, static_cast<int>(G) - 1));
    if (t.member(row, g)) {
      const int level = levels[row];
      const double d = best_patch_delta(t, model, g, static_cast<double>(level) / m, q);
      const double want_d = static_cast<double>(testing::ref_best_shift(t, levels, m, g, level, q)) / m;
      worst = std::max(worst, std::abs(d - want_d));
      v.require(std::abs(d - want_d) <= kOracleTol, "best_patch_delta");
    }

    std::vector<double> thr(n);
    for (std::size_t i = 0; i < n; ++i) thr[i] = static_cast<double>(levels[i]) / m;
    for (std::size_t h = 0; h < G; ++h) {
      if (t.group_size(h) == 0) continue;
      const double a = calibration_error_Q(model, t, h, q, m);
      const double b = testing::ref_Q(t, levels, thr, m, h, q);
      worst = std::max(worst, std::abs(a - b));
      v.require(std::abs(a - b) <= kOracleTol, "calibration_error_Q");
    }

    GroupLinearModel lin{BaseThreshold::constant(gen.uniform(0, 0.5)), {}};
    for (std::size_t h = 0; h < G; ++h) lin.lambda.push_back(gen.uniform(-0.3, 0.3));
    g = static_cast<std::size_t>(gen.integer(0, static_cast<int>(G) - 1));
    if (t.group_size(g) > 0) {
      const double a = coordinate_shift(t, lin, g, q);
      const double b = testing::ref_coordinate_shift(t, thresholds(lin, t), g, q);
      worst = std::max(worst, std::abs(a - b));
      v.require(std::abs(a - b) <= kOracleTol, "coordinate_shift");
    }
  }
  v.detail += "1000 instances; max disagreement " + fmt(worst);
  return v;
}

Verdict criterion7() {
  Verdict v;
  testing::Gen gen(707);
  const double h = 1e-5;
  int done = 0, tries = 0;
  double worst = 0;
  while (done < 100 && tries < 10000) {
    ++tries;
    const std::size_t G = static_cast<std::size_t>(gen.integer(1, 3));
    auto t = gen.table(static_cast<std::size_t>(gen.integer(1, 100)), G);
    const double q = gen.uniform(0.05, 0.95);
    ThresholdModel model;
    switch (done % 3) {
      case 0: model = ConstantModel{gen.uniform()}; break;
      case 1: {
        GroupLinearModel lin{BaseThreshold::constant(gen.uniform(0, 0.5)), {}};
        for (std::size_t g = 0; g < G; ++g) lin.lambda.push_back(gen.uniform(-0.3, 0.3));
        model = lin;
        break;
      }
      default: model = gen.bucketed(t, gen.integer(2, 50), gen.integer(0, 5));
    }
    const auto f = thresholds(model, t);
    bool near = false;
    for (std::size_t i = 0; i < t.size(); ++i) near = near || std::abs(t.score(i) - f[i]) <= 2 * h;
    if (near) continue;
    auto up = f, down = f;
    for (auto& x : up) x += h;
    for (auto& x : down) x -= h;
    const double fd = (mean_pinball(up, t.scores(), q) - mean_pinball(down, t.scores(), q)) / (2 * h);
    const double law = empirical_cdf(model, t) - q;
    worst = std::max(worst, std::abs(fd - law));
    v.require(std::abs(fd - law) <= kOracleTol, "finite difference off by " + fmt(std::abs(fd - law)));
    ++done;
  }
  v.require(done == 100, "only " + std::to_string(done) + " triples away from breakpoints");
  v.detail += std::to_string(done) + " triples; max |fd - (cdf - q)| " + fmt(worst);
  return v;
}

Verdict criterion8() {
  Verdict v;
  testing::Gen gen(808);
  int gcp_cases = 0, mvp_cases = 0;
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> s(static_cast<std::size_t>(gen.integer(1, 2000)));
    for (auto& x : s) x = gen.coin(0.2) ? gen.integer(0, 20) / 20.0 : gen.uniform();
    auto t = testing::whole_space(s);
    const double q = gen.uniform(0.05, 0.95);
    GcpOptions o;
    o.q = q;
    auto fit = fit_gcp(t, BaseThreshold::constant(0.0), o);
    v.require(thresholds(fit.model, t)[0] == fit_naive(t, q, QuantileRule::Plain).tau,
              "gcp threshold differs from plain naive");
    ++gcp_cases;
  }
  for (int k = 0; k < 40; ++k) {
    std::vector<double> s(static_cast<std::size_t>(gen.integer(500, 5000)));
    const double p = gen.uniform(0.5, 3);
    for (auto& x : s) x = std::pow(gen.uniform(), p);
    auto t = testing::whole_space(s);
    CalibConfig cfg;
    cfg.q = gen.uniform(0.5, 0.95);
    cfg.m = gen.integer(10, 100);
    auto fit = fit_mvp(t, BaseThreshold::constant(gen.uniform(0, 1)), cfg);
    const double cov = empirical_cdf(fit.model, t);
    worst = std::max(worst, std::abs(cov - cfg.q) * cfg.m);
    v.require(std::abs(cov - cfg.q) <= 1.0 / cfg.m, "mvp marginal coverage " + fmt(cov));
    ++mvp_cases;
  }
  v.detail += std::to_string(gcp_cases) + " gcp tables equal naive exactly; " + std::to_string(mvp_cases) +
              " mvp fits, max |cov-q|*m " + fmt(worst);
  return v;
}

Verdict criterion9(std::vector<DivisibleData>& store, std::vector<MvpRecord>& mvps,
                   std::vector<GcpRecord>& gcps) {
  Verdict v;
  double max_gcp_q = 0, max_mvp_q = 0, min_gcp_q = 1, min_mvp_q = 1, worst_gcp = 0, worst_mvp = 0;
  store.reserve(kDivisibleRuns);
  for (int run = 0; run < kDivisibleRuns; ++run) {
    DivisibleConfig dc;
    dc.seed = static_cast<std::uint64_t>(run);
    store.push_back(gen_divisible_task(dc));
    const auto& d = store.back();
    const auto& t = d.calib;
    const double n = static_cast<double>(t.size());
    CalibConfig cfg;

    GcpOptions o;
    auto gcp = fit_gcp(t, BaseThreshold::constant(0.0), o);
    v.require(gcp.converged, "gcp did not converge");
    const auto gcov = coverage_by_group(t, thresholds(gcp.model, t));
    for (double c : gcov) {
      worst_gcp = std::max(worst_gcp, std::abs(c - cfg.q) / gcp.tol);
      v.require(std::abs(c - cfg.q) <= gcp.tol, "gcp group coverage outside tol");
    }

    auto mvp = fit_mvp(t, BaseThreshold::constant(0.0), cfg);
    v.require(mvp.trace.halting == HaltReason::Multicalibrated, "mvp not multicalibrated");
    const auto mcov = coverage_by_group(t, thresholds(mvp.model, t));
    auto check = multicalibration_check(t, mvp.model, cfg.q, cfg.alpha);
    for (std::size_t g = 0; g < t.num_groups(); ++g) {
      const double pg = static_cast<double>(t.group_size(g)) / n;
      const double bound = std::sqrt(cfg.alpha / pg);
      worst_mvp = std::max(worst_mvp, std::abs(mcov[g] - cfg.q) / bound);
      v.require(std::abs(mcov[g] - cfg.q) <= bound, "mvp group coverage outside sqrt(alpha/Pr[g])");
      v.require(check.q_values[g] <= cfg.alpha / pg, "mvp Q above alpha/Pr[g]");
    }

    for (int k = 0; k < 2; ++k) {
      const ThresholdModel model = k == 0 ? ThresholdModel{gcp.model} : ThresholdModel{mvp.model};
      double top = 0;
      for (std::size_t g = 0; g < d.test.num_groups(); ++g) {
        const double pg = static_cast<double>(d.test.group_size(g)) / static_cast<double>(d.test.size());
        top = std::max(top, pg * calibration_error_Q(model, d.test, g, cfg.q, cfg.m));
      }
      (k == 0 ? max_gcp_q : max_mvp_q) = std::max(k == 0 ? max_gcp_q : max_mvp_q, top);
      (k == 0 ? min_gcp_q : min_mvp_q) = std::min(k == 0 ? min_gcp_q : min_mvp_q, top);
    }
    mvps.push_back({&d.calib, mvp.model, mvp.trace.halting, cfg.alpha, cfg.q});
    gcps.push_back({&d.calib, std::move(gcp), 0.0, cfg.q});
  }
  for (double x : {max_gcp_q, max_mvp_q, min_gcp_q, min_mvp_q})
    v.require(x >= 1e-4 && x <= 1e-2, "test calibration error " + fmt(x) + " outside [1e-4, 1e-2]");
  v.detail += std::to_string(kDivisibleRuns) + " runs; calib |cov-q|/bound gcp " + fmt(worst_gcp) +
              ", mvp " + fmt(worst_mvp) + "; test max Pr[g]Q gcp " + fmt(min_gcp_q) + ".." +
              fmt(max_gcp_q) + ", mvp " + fmt(min_mvp_q) + ".." + fmt(max_mvp_q);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion10() {
  Verdict v;
  const fs::path dir = fs::temp_directory_path() / ("mvcp_accept_" + std::to_string(::getpid()));
  LinearNoiseConfig cfg;
  cfg.seed = 10;
  cfg.n_test = 100000;
  auto d = gen_linear_group_noise(cfg);
  CalibConfig config;
  config.seed = cfg.seed;
  for (int k = 0; k < 2; ++k) {
    auto again = gen_linear_group_noise(cfg);
    write_comparison(compare_methods(Dataset{again.calib, again.test, true}, config),
                     (dir / ("run" + std::to_string(k))).string());
  }
  std::size_t bytes = 0;
  for (const char* name : {"report.json", "coverage.csv", "cells.csv"}) {
    const auto a = slurp(dir / "run0" / name), b = slurp(dir / "run1" / name);
    bytes += a.size();
    v.require(!a.empty() && a == b, std::string(name) + " differs between runs");
  }
  int models = 0;
  for (const auto& method : kMethods) {
    FitOptions o;
    o.method = method;
    o.config = config;
    auto fit = fit_method(d.calib, o);
    const auto path = (dir / (method + ".json")).string();
    save_model(path, fit.file);
    const auto loaded = load_model(path);
    v.require(thresholds(fit.file.model, d.test) == thresholds(loaded.model, d.test),
              method + " thresholds differ after load");
    const auto a = report_to_json(evaluate_model(fit.file.model, d.test, metadata_of(fit.file))).dump();
    const auto b = report_to_json(evaluate_model(loaded.model, d.test, metadata_of(loaded))).dump();
    v.require(a == b, method + " report differs after load");
    ++models;
  }
  fs::remove_all(dir);
  v.detail += "compare outputs identical (" + std::to_string(bytes) + " bytes); " + std::to_string(models) +
              " models round-trip on " + std::to_string(d.test.size()) + " rows";
  return v;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& title, const Verdict& v) {
    std::printf("%s %2d  %s: %s\n", v.ok ? "PASS" : "FAIL", id, title.c_str(), v.detail.c_str());
    std::fflush(stdout);
    failures += !v.ok;
  };
  auto guarded = [&](const std::function<Verdict()>& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      Verdict v;
      v.require(false, std::string("exception: ") + e.what());
      return v;
    }
  };

  LinearResults linear;
  const auto t0 = std::chrono::steady_clock::now();
  std::string linear_error;
  try {
    linear = run_linear();
  } catch (const std::exception& e) {
    linear_error = e.what();
  }
  auto needs_linear = [&](const std::function<Verdict()>& fn) {
    if (!linear_error.empty()) {
      Verdict v;
      v.require(false, "linear benchmark failed: " + linear_error);
      return v;
    }
    return guarded(fn);
  };
  report(1, "linear benchmark coverage", needs_linear([&] { return criterion1(linear); }));
  report(2, "mvp rounds on the linear benchmark", needs_linear([&] { return criterion2(linear); }));

  std::vector<DivisibleData> divisible;
  std::vector<MvpRecord> mvps = linear.mvp;
  std::vector<GcpRecord> gcps = linear.gcp;
  const Verdict v9 = guarded([&] { return criterion9(divisible, mvps, gcps); });

  // small random tables add fits with few rows and heavy overlap
  std::vector<ScoreTable> small;
  testing::Gen gen(303);
  small.reserve(200);
  for (int k = 0; k < 200; ++k)
    small.push_back(gen.table(static_cast<std::size_t>(gen.integer(5, 300)),
                              static_cast<std::size_t>(gen.integer(1, 5)), gen.uniform(0.2, 0.8)));
  for (const auto& t : small) {
    CalibConfig cfg;
    cfg.q = gen.uniform(0.1, 0.95);
    cfg.alpha = std::pow(10.0, gen.uniform(-4, -2));
    cfg.m = gen.integer(2, 50);
    auto fit = fit_mvp(t, BaseThreshold::constant(0.0), cfg);
    mvps.push_back({&t, fit.model, fit.trace.halting, cfg.alpha, cfg.q});
    GcpOptions o;
    o.q = cfg.q;
    const double f0 = gen.uniform(0, 0.5);
    gcps.push_back({&t, fit_gcp(t, BaseThreshold::constant(f0), o), f0, o.q});
  }

  report(3, "halting soundness", guarded([&] { return criterion3(mvps); }));
  report(4, "gcp fixed point", guarded([&] { return criterion4(gcps); }));
  report(5, "monotone descent", guarded(criterion5));
  report(6, "oracle equivalence", guarded(criterion6));
  report(7, "derivative law", guarded(criterion7));
  report(8, "single-group reduction", guarded(criterion8));
  report(9, "divisibility task", v9);
  report(10, "determinism and round trip", guarded(criterion10));

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d/10 criteria passed in %.1f s\n", 10 - failures, secs);
  return failures == 0 ? 0 : 1;
}
