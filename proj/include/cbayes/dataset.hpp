#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace cbayes {

enum class OutcomeKind { Real, Binary };

/// One observation. `group` is 1-based when present.
struct Datum {
  std::vector<double> x;
  double y = 0.0;
  std::optional<int> group;
};

/// Per-column affine record used to move between raw and standardized units.
/// Response fields are empty when the response was left untouched.
struct Standardization {
  std::vector<double> x_mean;
  std::vector<double> x_scale;
  std::optional<double> y_mean;
  std::optional<double> y_scale;

  Datum apply(Datum raw) const;
  double response_to_raw(double standardized) const;
};

/// Ordered observations sharing a covariate dimension. Either every datum
/// carries a group index or none does.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Datum> data);

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t dim() const { return dim_; }
  bool grouped() const { return grouped_; }
  /// Largest group index (0 for ungrouped data).
  int max_group() const;

  const Datum& operator[](std::size_t i) const { return data_[i]; }
  const std::vector<Datum>& data() const { return data_; }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  std::vector<double> outcomes() const;
  Dataset subset(std::span<const std::size_t> indices) const;

  const std::optional<Standardization>& standardization() const { return standardization_; }
  void set_standardization(Standardization s) { standardization_ = std::move(s); }

 private:
  std::vector<Datum> data_;
  std::size_t dim_ = 0;
  bool grouped_ = false;
  std::optional<Standardization> standardization_;
};

/// Centers and scales every covariate column to mean 0 and population sd 1
/// (constant columns keep scale 1). The response is transformed the same way
/// only for real-valued outcomes when `response` is set.
Dataset standardize(const Dataset& raw, OutcomeKind kind, bool response = true);

/// Header row with covariates `x1..xd`, outcome `y` and optional 1-based
/// `group`. Columns may appear in any order; `y` may be omitted when
/// `require_outcome` is false (prediction inputs), in which case y = 0.
Dataset parse_dataset_csv(std::istream& in, bool require_outcome = true);
Dataset read_dataset_csv(const std::filesystem::path& path, bool require_outcome = true);
void write_dataset_csv(const Dataset& data, std::ostream& out);

}  // namespace cbayes
