#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dspca/error.hpp"

namespace dspca {

/// Class labels are 1 and 2 externally; slot() maps them to 0 and 1.
constexpr int kClassOne = 1;
constexpr int kClassTwo = 2;
constexpr int slot(int label) noexcept { return label - 1; }

struct Observation {
  Eigen::VectorXd features;
  double index = 0.0;
  int label = kClassOne;
};

/// Labeled observations (x_i, u_i, y_i) stored row-major by observation.
/// Immutable after construction.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Eigen::MatrixXd features, Eigen::VectorXd index, std::vector<int> labels);

  Eigen::Index n() const noexcept { return features_.rows(); }
  Eigen::Index p() const noexcept { return features_.cols(); }
  Eigen::Index n1() const noexcept { return static_cast<Eigen::Index>(rows_[0].size()); }
  Eigen::Index n2() const noexcept { return static_cast<Eigen::Index>(rows_[1].size()); }
  Eigen::Index count(int label) const { return static_cast<Eigen::Index>(class_rows(label).size()); }

  const Eigen::MatrixXd& features() const noexcept { return features_; }
  const Eigen::VectorXd& index() const noexcept { return index_; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  /// Row positions of observations carrying `label`, in dataset order.
  const std::vector<Eigen::Index>& class_rows(int label) const;

  /// Features of class `label` gathered into a contiguous matrix.
  const Eigen::MatrixXd& class_features(int label) const;
  const Eigen::VectorXd& class_index(int label) const;

  std::pair<double, double> index_range() const;
  double prior(int label) const;

  Observation observation(Eigen::Index i) const;

  Dataset subset(const std::vector<Eigen::Index>& rows) const;
  Dataset select_features(const std::vector<Eigen::Index>& columns) const;
  Dataset with_index(Eigen::VectorXd index) const;

  /// Throws unless both classes have at least `min_per_class` rows.
  void require_classes(Eigen::Index min_per_class, const char* context) const;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd index_;
  std::vector<int> labels_;
  std::vector<Eigen::Index> rows_[2];
  Eigen::MatrixXd class_features_[2];
  Eigen::VectorXd class_index_[2];
};

/// Column mapping for CSV ingestion. Empty `features` means every column
/// that is neither the label, the index, nor listed in `ignore`.
struct CsvSchema {
  std::string label_column = "y";
  std::string index_column = "u";
  std::vector<std::string> features;
  std::vector<std::string> ignore;
};

/// Query rows for prediction. Labels are present only when the source
/// carried a label column.
struct QueryTable {
  Eigen::MatrixXd features;
  Eigen::VectorXd index;
  std::optional<std::vector<int>> labels;
  std::vector<std::string> feature_names;

  Eigen::Index size() const noexcept { return features.rows(); }
};

struct LoadedDataset {
  Dataset data;
  std::vector<std::string> feature_names;
};

LoadedDataset load_csv(std::istream& source, const CsvSchema& schema = {});
LoadedDataset load_csv_file(const std::string& path, const CsvSchema& schema = {});

/// Like load_csv, but a missing label column is allowed.
QueryTable load_queries(std::istream& source, const CsvSchema& schema = {});
QueryTable load_queries_file(const std::string& path, const CsvSchema& schema = {});

/// Writes header `u,y,<names>` and rows with shortest round-trip decimals.
void write_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& feature_names = {});
void write_csv_file(const std::string& path, const Dataset& ds,
                    const std::vector<std::string>& feature_names = {});

std::vector<std::string> default_feature_names(Eigen::Index p);

/// Affine map of the index onto [0, 1], fitted on one dataset and reusable
/// on others.
struct IndexScaler {
  double min = 0.0;
  double max = 1.0;

  double apply(double u) const noexcept { return (u - min) / (max - min); }
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
};

void to_json(nlohmann::json& j, const IndexScaler& s);
void from_json(const nlohmann::json& j, IndexScaler& s);

IndexScaler fit_index_scaler(const Dataset& ds);
std::pair<Dataset, IndexScaler> normalize_index(const Dataset& ds);

/// Welch two-sample t statistic per feature (class 1 minus class 2).
/// Zero standard error gives +inf when the means differ and 0 otherwise.
Eigen::VectorXd welch_t_statistics(const Dataset& ds);

/// Indices of the `keep` features with largest |t|, descending; ties go to
/// the lower feature index.
std::vector<Eigen::Index> t_test_screen(const Dataset& train, Eigen::Index keep);

struct Split {
  Dataset train;
  Dataset test;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

/// Reproducibility record for a split followed by screening.
struct ScreenManifest {
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
  Eigen::Index keep = 0;
  std::vector<Eigen::Index> selected;
  std::vector<std::string> selected_names;
  std::vector<double> statistics;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

void to_json(nlohmann::json& j, const ScreenManifest& m);

}  // namespace dspca
