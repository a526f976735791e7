#include "cbayes/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "cbayes/error.hpp"

namespace cbayes::report {

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json stat_json(const SummaryStat& s) {
  return {{"mean", finite_or_null(s.mean)}, {"se", finite_or_null(s.se)}, {"n", s.n}};
}

std::string fmt_stat(const SummaryStat& s, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits);
  if (std::isfinite(s.mean)) {
    os << s.mean << " (" << s.se << ")";
  } else {
    os << "inf";
  }
  return os.str();
}

std::string group_label(int g) { return g == 0 ? "Overall" : std::to_string(g); }

}  // namespace

json grid_json(const ConformalGrid& grid) {
  return {{"lo", grid.lo()}, {"hi", grid.hi()}, {"n", grid.size()}};
}

json set_json(const PredictionSet& set) {
  if (set.kind == OutcomeKind::Binary) return {{"labels", set.labels}};
  json intervals = json::array();
  for (const auto& iv : set.intervals) intervals.push_back({iv.lo, iv.hi});
  return {{"intervals", intervals}};
}

json conformal_json(const Datum& test, const ConformalGrid& grid, const ConformalResult& result) {
  json j;
  j["method"] = "cb";
  j["test_x"] = test.x;
  j["alpha"] = result.set.alpha;
  j["grid"] = grid_json(grid);
  j["pi"] = result.profile.pi;
  j["ess"] = result.profile.ess;
  j["set"] = set_json(result.set);
  j["measure"] = result.set.measure;
  if (!result.profile.degenerate.empty()) j["degenerate"] = result.profile.degenerate;
  return j;
}

json group_json(const Datum& test, const ConformalGrid& grid, const GroupConformalResult& result) {
  json j = conformal_json(test, grid, result.result);
  j["group"] = result.group;
  j["alpha_j"] = result.alpha;
  j["feasible"] = result.feasible;
  if (result.warning) j["warning"] = *result.warning;
  return j;
}

json bayes_json(const Datum& test, const ConformalGrid& grid, const CredibleInterval& interval) {
  json j;
  j["method"] = "bayes";
  j["test_x"] = test.x;
  if (test.group) j["group"] = *test.group;
  j["alpha"] = interval.alpha;
  j["grid"] = grid_json(grid);
  j["set"] = {{"intervals", json::array({json::array({interval.lo, interval.hi})})}};
  j["measure"] = interval.length();
  if (interval.clamped_lo || interval.clamped_hi) {
    j["warning"] = "predictive quantile outside the grid; endpoint clamped";
    j["clamped"] = {{"lo", interval.clamped_lo}, {"hi", interval.clamped_hi}};
  }
  return j;
}

json class_json(const Datum& test, double alpha, const ClassPredictionReport& report, const char* method) {
  json j;
  j["method"] = method;
  j["test_x"] = test.x;
  j["alpha"] = alpha;
  j["set"] = {{"labels", report.labels}};
  j["measure"] = report.labels.size();
  j["p1"] = report.p1;
  if (report.confidence) j["confidence"] = *report.confidence;
  if (report.credibility) j["credibility"] = *report.credibility;
  return j;
}

json split_json(const Datum& test, double alpha, const SplitInterval& interval) {
  json j;
  j["method"] = "split";
  j["test_x"] = test.x;
  j["alpha"] = alpha;
  j["center"] = interval.center;
  j["bounded"] = interval.bounded;
  j["set"] = {{"intervals", json::array({json::array({finite_or_null(interval.lo), finite_or_null(interval.hi)})})}};
  j["measure"] = finite_or_null(interval.length());
  return j;
}

json envelope(const json& config, json results) {
  json j;
  j["format_version"] = kFormatVersion;
  j["config"] = config;
  j["measure_convention"] = kMeasureConvention;
  j["results"] = std::move(results);
  return j;
}

json coverage_json(const CoverageReport& report) {
  const auto& o = report.options;
  json methods = json::array();
  for (Method m : o.methods) methods.push_back(to_string(m));
  json j;
  j["scenario"] = {{"kind", to_string(report.scenario.kind)},
                   {"name", report.scenario.name},
                   {"groups", report.scenario.grouped() ? report.scenario.groups : 0},
                   {"group_size", report.scenario.group_size},
                   {"n", report.scenario.n},
                   {"dim", report.scenario.dim},
                   {"n_test", report.scenario.n_test}};
  if (report.scenario.fixed) {
    j["scenario"]["fixed"] = {{"theta", report.scenario.fixed->theta}, {"tau", report.scenario.fixed->tau}};
  }
  j["methods"] = methods;
  j["alpha"] = o.alpha;
  j["target"] = report.target;
  j["repeats"] = o.repeats;
  j["completed"] = report.repeats.size();
  j["T"] = o.draws;
  j["tune"] = o.tune;
  j["seed"] = o.seed;
  j["n_grid"] = o.n_grid;
  j["coverage_mode"] = o.coverage == CoverageMode::Grid ? "grid" : "exact";
  j["sampling_seconds"] = stat_json(report.sampling_seconds);
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row;
    row["method"] = to_string(r.method);
    row["group"] = r.group == 0 ? json("overall") : json(r.group);
    row["coverage"] = stat_json(r.coverage);
    row["coverage_grid"] = stat_json(r.coverage_grid);
    row["coverage_exact"] = stat_json(r.coverage_exact);
    row["miss"] = report.miss(r);
    row["length"] = stat_json(r.length);
    row["seconds"] = stat_json(r.seconds);
    if (r.empty_rate) row["empty_rate"] = stat_json(*r.empty_rate);
    if (r.both_rate) row["both_rate"] = stat_json(*r.both_rate);
    if (r.misclassification) row["misclassification"] = stat_json(*r.misclassification);
    rows.push_back(row);
  }
  j["rows"] = rows;
  json failures = json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"repeat", f.repeat}, {"sampler_seed", f.sampler_seed}, {"message", f.message}});
  }
  j["failures"] = failures;
  return j;
}

std::string coverage_table(const CoverageReport& report) {
  const auto& methods = report.options.methods;
  const int J = report.scenario.grouped() ? static_cast<int>(report.scenario.groups) : 0;
  const bool binary = report.scenario.outcome() == OutcomeKind::Binary;
  constexpr int kLabel = 16, kGroup = 9, kCol = 18;

  std::ostringstream os;
  os << "scenario " << (report.scenario.name.empty() ? to_string(report.scenario.kind) : report.scenario.name)
     << "  alpha " << report.options.alpha << "  target " << std::fixed << std::setprecision(3) << report.target
     << "  R " << report.repeats.size() << "  T " << report.options.draws << "\n";
  os << std::left << std::setw(kLabel) << "" << std::setw(kGroup) << "Group";
  for (Method m : methods) os << std::setw(kCol) << to_string(m);
  os << "\n";

  auto section = [&](const std::string& title, auto cell) {
    for (int g = (J > 0 ? 1 : 0); g <= J; ++g) {
      os << std::setw(kLabel) << (g == (J > 0 ? 1 : 0) ? title : "") << std::setw(kGroup) << group_label(g);
      for (Method m : methods) os << std::setw(kCol) << cell(report.row(m, g));
      os << "\n";
    }
    if (J > 0) {
      os << std::setw(kLabel) << "" << std::setw(kGroup) << group_label(0);
      for (Method m : methods) os << std::setw(kCol) << cell(report.row(m, 0));
      os << "\n";
    }
  };
  section("Coverage", [&](const MethodGroupSummary& r) {
    return fmt_stat(r.coverage, 3) + (report.miss(r) ? "*" : "");
  });
  section(binary ? "Size" : "Length", [&](const MethodGroupSummary& r) { return fmt_stat(r.length, 2); });
  if (binary) {
    auto opt = [](const std::optional<SummaryStat>& s) { return s ? fmt_stat(*s, 3) : std::string("-"); };
    section("Misclass.", [&](const MethodGroupSummary& r) { return opt(r.misclassification); });
    section("Both {0,1}", [&](const MethodGroupSummary& r) { return opt(r.both_rate); });
    section("Empty", [&](const MethodGroupSummary& r) { return opt(r.empty_rate); });
  }
  os << std::setw(kLabel) << "Run-time (s)" << std::setw(kGroup) << "Overall";
  for (Method m : methods) os << std::setw(kCol) << fmt_stat(report.row(m, 0).seconds, 3);
  os << "\n";
  os << "Sampling time (s): " << fmt_stat(report.sampling_seconds, 3) << "\n";
  os << "* coverage not within 3 standard errors of the target\n";
  if (!report.failures.empty()) os << report.failures.size() << " repeat(s) aborted by the sampler\n";
  return os.str();
}

std::string coverage_csv(const CoverageReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "repeat,method,group,coverage,length,time\n";
  for (const auto& r : report.repeats) {
    for (const auto& m : r.methods) {
      for (std::size_t g = 0; g < m.cells.size(); ++g) {
        const CellRecord& c = m.cells[g];
        if (c.count == 0) continue;
        os << r.repeat << ',' << to_string(m.method) << ',' << (g == 0 ? std::string("overall") : std::to_string(g))
           << ',' << c.coverage(report.options.coverage) << ',' << c.length() << ',' << m.seconds << '\n';
      }
    }
  }
  return os.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("report", "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw InputError("report", "failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("report", "cannot rename output into " + path.string() + ": " + ec.message());
  }
}

}  // namespace cbayes::report
