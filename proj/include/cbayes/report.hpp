#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "cbayes/baselines.hpp"
#include "cbayes/bench.hpp"
#include "cbayes/conformal.hpp"
#include "cbayes/hierarchy.hpp"

namespace cbayes::report {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Length convention for regression sets, recorded in output metadata.
inline constexpr const char* kMeasureConvention = "grid spacing times included grid points";

json grid_json(const ConformalGrid& grid);
json set_json(const PredictionSet& set);

/// {method, test_x, alpha, grid, pi, ess, set, measure} for one test point.
json conformal_json(const Datum& test, const ConformalGrid& grid, const ConformalResult& result);
/// The conformal envelope extended with {group, alpha_j, feasible}.
json group_json(const Datum& test, const ConformalGrid& grid, const GroupConformalResult& result);
json bayes_json(const Datum& test, const ConformalGrid& grid, const CredibleInterval& interval);
json class_json(const Datum& test, double alpha, const ClassPredictionReport& report, const char* method);
json split_json(const Datum& test, double alpha, const SplitInterval& interval);

/// {format_version, config, results}.
json envelope(const json& config, json results);

json coverage_json(const CoverageReport& report);
/// Aligned text table with one column per method; coverage more than 3 se
/// from the target is marked with '*'.
std::string coverage_table(const CoverageReport& report);
/// Long format: repeat,method,group,coverage,length,time.
std::string coverage_csv(const CoverageReport& report);

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace cbayes::report
