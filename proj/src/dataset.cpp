#include "cbayes/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "cbayes/error.hpp"
#include "csv.hpp"

namespace cbayes {

Datum Standardization::apply(Datum raw) const {
  if (raw.x.size() != x_mean.size()) {
    throw InputError("likelihoods", "covariate dimension " + std::to_string(raw.x.size()) +
                                        " does not match standardization record of dimension " +
                                        std::to_string(x_mean.size()));
  }
  for (std::size_t k = 0; k < raw.x.size(); ++k) raw.x[k] = (raw.x[k] - x_mean[k]) / x_scale[k];
  if (y_mean) raw.y = (raw.y - *y_mean) / *y_scale;
  return raw;
}

double Standardization::response_to_raw(double standardized) const {
  if (!y_mean) return standardized;
  return standardized * *y_scale + *y_mean;
}

Dataset::Dataset(std::vector<Datum> data) : data_(std::move(data)) {
  if (data_.empty()) return;
  dim_ = data_.front().x.size();
  grouped_ = data_.front().group.has_value();
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const Datum& d = data_[i];
    if (d.x.size() != dim_) {
      throw InputError("likelihoods", "row " + std::to_string(i) + " has " +
                                          std::to_string(d.x.size()) + " covariates, expected " +
                                          std::to_string(dim_));
    }
    if (d.group.has_value() != grouped_) {
      throw InputError("likelihoods", "row " + std::to_string(i) +
                                          ": group index must be present on every datum or on none");
    }
    if (d.group && *d.group < 1) {
      throw InputError("likelihoods", "row " + std::to_string(i) + ": group index " +
                                          std::to_string(*d.group) + " is not 1-based");
    }
  }
}

int Dataset::max_group() const {
  int j = 0;
  for (const auto& d : data_) {
    if (d.group) j = std::max(j, *d.group);
  }
  return j;
}

std::vector<double> Dataset::outcomes() const {
  std::vector<double> y;
  y.reserve(data_.size());
  for (const auto& d : data_) y.push_back(d.y);
  return y;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Datum> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(data_.at(i));
  Dataset result(std::move(out));
  result.standardization_ = standardization_;
  return result;
}

namespace {

struct Moments {
  double mean;
  double scale;
};

// Population sd (divide by n); zero spread maps to scale 1.
template <class Get>
Moments column_moments(const std::vector<Datum>& data, Get get) {
  const double n = static_cast<double>(data.size());
  double mean = 0.0;
  for (const auto& d : data) mean += get(d);
  mean /= n;
  double ss = 0.0;
  for (const auto& d : data) {
    double r = get(d) - mean;
    ss += r * r;
  }
  double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) sd = 1.0;
  return {mean, sd};
}

}  // namespace

Dataset standardize(const Dataset& raw, OutcomeKind kind, bool response) {
  if (raw.empty()) throw InputError("likelihoods", "cannot standardize an empty dataset");
  Standardization rec;
  for (std::size_t k = 0; k < raw.dim(); ++k) {
    auto m = column_moments(raw.data(), [k](const Datum& d) { return d.x[k]; });
    rec.x_mean.push_back(m.mean);
    rec.x_scale.push_back(m.scale);
  }
  if (response && kind == OutcomeKind::Real) {
    auto m = column_moments(raw.data(), [](const Datum& d) { return d.y; });
    rec.y_mean = m.mean;
    rec.y_scale = m.scale;
  }
  std::vector<Datum> out;
  out.reserve(raw.size());
  for (const auto& d : raw) out.push_back(rec.apply(d));
  Dataset result(std::move(out));
  result.set_standardization(std::move(rec));
  return result;
}

Dataset parse_dataset_csv(std::istream& in, bool require_outcome) {
  csv::Table table = csv::read(in, "likelihoods");
  std::map<int, std::size_t> x_cols;
  std::optional<std::size_t> y_col, group_col;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name == "y") {
      y_col = c;
    } else if (name == "group") {
      group_col = c;
    } else if (name.size() > 1 && name[0] == 'x' &&
               std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      int k = std::stoi(name.substr(1));
      if (k < 1 || !x_cols.emplace(k, c).second) {
        throw InputError("likelihoods", "duplicate or invalid covariate column '" + name + "'");
      }
    } else {
      throw InputError("likelihoods", "unexpected column '" + name +
                                          "' (expected x1..xd, y, optional group)");
    }
  }
  if (require_outcome && !y_col) throw InputError("likelihoods", "dataset has no 'y' column");
  int expected = 1;
  for (const auto& [k, c] : x_cols) {
    if (k != expected) {
      throw InputError("likelihoods", "covariate columns must be x1..xd without gaps; missing x" +
                                          std::to_string(expected));
    }
    ++expected;
  }

  std::vector<Datum> data;
  data.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto value = [&](std::size_t c) {
      return csv::parse_number(row[c], "likelihoods", r + 2, table.header[c]);
    };
    Datum d;
    for (const auto& [k, c] : x_cols) d.x.push_back(value(c));
    if (y_col) d.y = value(*y_col);
    if (group_col) {
      double g = value(*group_col);
      if (g != std::floor(g) || g < 1) {
        throw InputError("likelihoods", "line " + std::to_string(r + 2) +
                                            ": group must be a positive integer");
      }
      d.group = static_cast<int>(g);
    }
    data.push_back(std::move(d));
  }
  return Dataset(std::move(data));
}

Dataset read_dataset_csv(const std::filesystem::path& path, bool require_outcome) {
  std::ifstream in(path);
  if (!in) throw InputError("likelihoods", "cannot open dataset file '" + path.string() + "'");
  return parse_dataset_csv(in, require_outcome);
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t k = 0; k < data.dim(); ++k) out << 'x' << (k + 1) << ',';
  out << 'y';
  if (data.grouped()) out << ",group";
  out << '\n';
  for (const auto& d : data) {
    for (double v : d.x) out << csv::format_number(v) << ',';
    out << csv::format_number(d.y);
    if (d.group) out << ',' << *d.group;
    out << '\n';
  }
}

}  // namespace cbayes
