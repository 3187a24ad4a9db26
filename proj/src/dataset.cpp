#include "dspca/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dspca/error.hpp"
#include "dspca/random.hpp"

namespace dspca {

Dataset::Dataset(Eigen::MatrixXd features, Eigen::VectorXd index, std::vector<int> labels)
    : features_(std::move(features)), index_(std::move(index)), labels_(std::move(labels)) {
  if (index_.size() != features_.rows() || static_cast<Eigen::Index>(labels_.size()) != features_.rows()) {
    throw Error(ErrorKind::shape, "dataset: features, index and labels disagree on row count");
  }
  for (Eigen::Index i = 0; i < n(); ++i) {
    const int y = labels_[static_cast<std::size_t>(i)];
    if (y != kClassOne && y != kClassTwo) {
      throw Error(ErrorKind::schema, "dataset: row " + std::to_string(i) + " has label " +
                                         std::to_string(y) + ", expected 1 or 2");
    }
    if (!std::isfinite(index_(i))) {
      throw Error(ErrorKind::domain, "dataset: row " + std::to_string(i) + " has a non-finite index");
    }
    rows_[slot(y)].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    const auto& rows = rows_[c];
    class_features_[c].resize(static_cast<Eigen::Index>(rows.size()), p());
    class_index_[c].resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      class_features_[c].row(static_cast<Eigen::Index>(k)) = features_.row(rows[k]);
      class_index_[c](static_cast<Eigen::Index>(k)) = index_(rows[k]);
    }
  }
}

const std::vector<Eigen::Index>& Dataset::class_rows(int label) const {
  if (label != kClassOne && label != kClassTwo) throw Error(ErrorKind::domain, "class label must be 1 or 2");
  return rows_[slot(label)];
}

const Eigen::MatrixXd& Dataset::class_features(int label) const {
  class_rows(label);
  return class_features_[slot(label)];
}

const Eigen::VectorXd& Dataset::class_index(int label) const {
  class_rows(label);
  return class_index_[slot(label)];
}

std::pair<double, double> Dataset::index_range() const {
  if (n() == 0) return {0.0, 0.0};
  return {index_.minCoeff(), index_.maxCoeff()};
}

double Dataset::prior(int label) const {
  return static_cast<double>(count(label)) / static_cast<double>(n());
}

Observation Dataset::observation(Eigen::Index i) const {
  return {features_.row(i).transpose(), index_(i), labels_[static_cast<std::size_t>(i)]};
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), p());
  Eigen::VectorXd u(static_cast<Eigen::Index>(rows.size()));
  std::vector<int> y(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = features_.row(rows[k]);
    u(static_cast<Eigen::Index>(k)) = index_(rows[k]);
    y[k] = labels_[static_cast<std::size_t>(rows[k])];
  }
  return Dataset(std::move(x), std::move(u), std::move(y));
}

Dataset Dataset::select_features(const std::vector<Eigen::Index>& columns) const {
  Eigen::MatrixXd x(n(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] < 0 || columns[k] >= p()) throw Error(ErrorKind::shape, "feature column out of range");
    x.col(static_cast<Eigen::Index>(k)) = features_.col(columns[k]);
  }
  return Dataset(std::move(x), index_, labels_);
}

Dataset Dataset::with_index(Eigen::VectorXd index) const {
  return Dataset(features_, std::move(index), labels_);
}

void Dataset::require_classes(Eigen::Index min_per_class, const char* context) const {
  if (n1() < min_per_class || n2() < min_per_class) {
    throw Error(ErrorKind::shape, std::string(context) + ": each class needs at least " +
                                      std::to_string(min_per_class) + " observations (have " +
                                      std::to_string(n1()) + " and " + std::to_string(n2()) + ")");
  }
}

// ---------------------------------------------------------------- CSV

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

struct ParsedTable {
  std::vector<std::string> feature_names;
  Eigen::MatrixXd features;
  Eigen::VectorXd index;
  std::optional<std::vector<int>> labels;
};

ParsedTable parse_table(std::istream& in, const CsvSchema& schema, bool label_required) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, "csv: missing header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = split_line(line);

  auto find = [&](const std::string& name) -> long {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<long>(it - header.begin());
  };
  const long index_col = find(schema.index_column);
  if (index_col < 0) throw Error(ErrorKind::schema, "csv: index column '" + schema.index_column + "' not found");
  const long label_col = find(schema.label_column);
  if (label_col < 0 && label_required) {
    throw Error(ErrorKind::schema, "csv: label column '" + schema.label_column + "' not found");
  }

  std::vector<long> feature_cols;
  ParsedTable table;
  if (!schema.features.empty()) {
    for (const auto& name : schema.features) {
      const long c = find(name);
      if (c < 0) throw Error(ErrorKind::schema, "csv: feature column '" + name + "' not found");
      feature_cols.push_back(c);
      table.feature_names.push_back(name);
    }
  } else {
    for (long c = 0; c < static_cast<long>(header.size()); ++c) {
      if (c == index_col || c == label_col) continue;
      const auto& name = header[static_cast<std::size_t>(c)];
      if (std::find(schema.ignore.begin(), schema.ignore.end(), name) != schema.ignore.end()) continue;
      feature_cols.push_back(c);
      table.feature_names.push_back(name);
    }
  }

  std::vector<double> values;
  std::vector<double> idx;
  std::vector<int> labels;
  const std::size_t width = header.size();
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != width) {
      throw Error(ErrorKind::format, "csv: line " + std::to_string(line_no) + " has " +
                                         std::to_string(cells.size()) + " fields, header has " +
                                         std::to_string(width));
    }
    auto cell_value = [&](long c) {
      double v = 0.0;
      if (!parse_double(cells[static_cast<std::size_t>(c)], v)) {
        throw Error(ErrorKind::parse, "csv: row " + std::to_string(row + 1) + " (line " +
                                          std::to_string(line_no) + "), column '" +
                                          header[static_cast<std::size_t>(c)] + "': cannot parse '" +
                                          cells[static_cast<std::size_t>(c)] + "' as a number");
      }
      return v;
    };
    for (long c : feature_cols) values.push_back(cell_value(c));
    const double u = cell_value(index_col);
    if (!std::isfinite(u)) {
      throw Error(ErrorKind::parse, "csv: row " + std::to_string(row + 1) + " has a non-finite index");
    }
    idx.push_back(u);
    if (label_col >= 0) {
      const double y = cell_value(label_col);
      if (y != 1.0 && y != 2.0) {
        throw Error(ErrorKind::schema, "csv: row " + std::to_string(row + 1) + " (line " +
                                           std::to_string(line_no) + ") has label '" +
                                           cells[static_cast<std::size_t>(label_col)] +
                                           "', expected 1 or 2");
      }
      labels.push_back(static_cast<int>(y));
    }
    ++row;
  }
  if (row == 0) throw Error(ErrorKind::format, "csv: no observations");

  const auto p = static_cast<Eigen::Index>(feature_cols.size());
  table.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(row), p);
  table.index = Eigen::Map<const Eigen::VectorXd>(idx.data(), static_cast<Eigen::Index>(row));
  if (label_col >= 0) table.labels = std::move(labels);
  return table;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  return in;
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

LoadedDataset load_csv(std::istream& source, const CsvSchema& schema) {
  auto table = parse_table(source, schema, true);
  return {Dataset(std::move(table.features), std::move(table.index), std::move(*table.labels)),
          std::move(table.feature_names)};
}

LoadedDataset load_csv_file(const std::string& path, const CsvSchema& schema) {
  auto in = open_input(path);
  return load_csv(in, schema);
}

QueryTable load_queries(std::istream& source, const CsvSchema& schema) {
  auto table = parse_table(source, schema, false);
  return {std::move(table.features), std::move(table.index), std::move(table.labels),
          std::move(table.feature_names)};
}

QueryTable load_queries_file(const std::string& path, const CsvSchema& schema) {
  auto in = open_input(path);
  return load_queries(in, schema);
}

std::vector<std::string> default_feature_names(Eigen::Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

void write_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& feature_names) {
  const auto names = feature_names.empty() ? default_feature_names(ds.p()) : feature_names;
  if (static_cast<Eigen::Index>(names.size()) != ds.p()) {
    throw Error(ErrorKind::shape, "write_csv: feature name count does not match p");
  }
  std::string line = "u,y";
  for (const auto& name : names) {
    line += ',';
    line += name;
  }
  out << line << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    line.clear();
    append_number(line, ds.index()(i));
    line += ',';
    line += std::to_string(ds.labels()[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
      line += ',';
      append_number(line, ds.features()(i, j));
    }
    out << line << '\n';
  }
}

void write_csv_file(const std::string& path, const Dataset& ds, const std::vector<std::string>& feature_names) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  write_csv(out, ds, feature_names);
}

// ---------------------------------------------------------------- index

Eigen::VectorXd IndexScaler::apply(const Eigen::VectorXd& u) const {
  return (u.array() - min) / (max - min);
}

void to_json(nlohmann::json& j, const IndexScaler& s) { j = {{"min", s.min}, {"max", s.max}}; }

void from_json(const nlohmann::json& j, IndexScaler& s) {
  j.at("min").get_to(s.min);
  j.at("max").get_to(s.max);
}

IndexScaler fit_index_scaler(const Dataset& ds) {
  const auto [lo, hi] = ds.index_range();
  if (!(hi > lo)) {
    throw Error(ErrorKind::degenerate_index, "normalize_index: all index values equal " + std::to_string(lo));
  }
  return {lo, hi};
}

std::pair<Dataset, IndexScaler> normalize_index(const Dataset& ds) {
  const IndexScaler scaler = fit_index_scaler(ds);
  Eigen::VectorXd u = scaler.apply(ds.index());
  // Pin the endpoints exactly; the affine map can land one ulp off.
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (ds.index()(i) == scaler.min) u(i) = 0.0;
    if (ds.index()(i) == scaler.max) u(i) = 1.0;
  }
  return {ds.with_index(std::move(u)), scaler};
}

// ---------------------------------------------------------------- screening

Eigen::VectorXd welch_t_statistics(const Dataset& ds) {
  ds.require_classes(2, "t_test_screen");
  const Eigen::MatrixXd& a = ds.class_features(kClassOne);
  const Eigen::MatrixXd& b = ds.class_features(kClassTwo);
  const double na = static_cast<double>(a.rows());
  const double nb = static_cast<double>(b.rows());
  const Eigen::RowVectorXd ma = a.colwise().mean();
  const Eigen::RowVectorXd mb = b.colwise().mean();
  const Eigen::RowVectorXd va = (a.rowwise() - ma).colwise().squaredNorm() / (na - 1.0);
  const Eigen::RowVectorXd vb = (b.rowwise() - mb).colwise().squaredNorm() / (nb - 1.0);

  Eigen::VectorXd t(ds.p());
  for (Eigen::Index j = 0; j < ds.p(); ++j) {
    const double diff = ma(j) - mb(j);
    const double se = std::sqrt(va(j) / na + vb(j) / nb);
    if (se > 0.0) {
      t(j) = diff / se;
    } else {
      t(j) = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    }
  }
  return t;
}

std::vector<Eigen::Index> t_test_screen(const Dataset& train, Eigen::Index keep) {
  if (keep < 1 || keep > train.p()) {
    throw Error(ErrorKind::usage, "t_test_screen: keep must lie in [1, p], got " + std::to_string(keep));
  }
  const Eigen::VectorXd t = welch_t_statistics(train);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.p()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index l, Eigen::Index r) { return std::abs(t(l)) > std::abs(t(r)); });
  order.resize(static_cast<std::size_t>(keep));
  return order;
}

// ---------------------------------------------------------------- splitting

Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::usage, "stratified_split: test fraction must lie in (0, 1)");
  }
  auto rng = make_stream(seed, {0x73706c6974ULL});
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
  for (int label : {kClassOne, kClassTwo}) {
    std::vector<Eigen::Index> rows = ds.class_rows(label);
    const auto n_c = static_cast<long>(rows.size());
    const long n_test = std::lround(test_fraction * static_cast<double>(n_c));
    if (n_c - n_test < 2) {
      throw Error(ErrorKind::split, "stratified_split: class " + std::to_string(label) + " keeps " +
                                        std::to_string(n_c - n_test) +
                                        " training observations, need at least 2");
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + n_test);
    train_rows.insert(train_rows.end(), rows.begin() + n_test, rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  Split out{ds.subset(train_rows), Dataset{}, train_rows, test_rows};
  if (!test_rows.empty()) out.test = ds.subset(test_rows);
  return out;
}

void to_json(nlohmann::json& j, const ScreenManifest& m) {
  j = {{"seed", m.seed},
       {"test_fraction", m.test_fraction},
       {"keep", m.keep},
       {"selected", m.selected},
       {"selected_names", m.selected_names},
       {"t_statistics", m.statistics},
       {"train_rows", m.train_rows},
       {"test_rows", m.test_rows}};
}

}  // namespace dspca
