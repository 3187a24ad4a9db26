#include "dspca/kernel.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace dspca {

void Bandwidths::validate() const {
  for (double h : mean_h)
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::domain, "mean bandwidths must be positive");
  for (double h : cov_h)
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::domain, "covariance bandwidths must be positive");
}

void to_json(nlohmann::json& j, const Bandwidths& bw) {
  j = {{"mean_h", bw.mean_h}, {"cov_h", bw.cov_h}};
}

void from_json(const nlohmann::json& j, Bandwidths& bw) {
  j.at("mean_h").get_to(bw.mean_h);
  j.at("cov_h").get_to(bw.cov_h);
  bw.validate();
}

Eigen::VectorXd class_kernel_weights(const Dataset& ds, int label, double u, double h, double* raw_sum) {
  const Eigen::VectorXd& idx = ds.class_index(label);
  if (idx.size() == 0) throw Error(ErrorKind::shape, "class " + std::to_string(label) + " is empty");
  if (!(h > 0.0)) throw Error(ErrorKind::domain, "kernel bandwidth must be positive");
  Eigen::VectorXd w(idx.size());
  for (Eigen::Index i = 0; i < idx.size(); ++i) w(i) = kernel_weight(idx(i) - u, h);
  const double total = w.sum();
  if (raw_sum) *raw_sum = total;
  if (!(total >= kWeightFloor)) {
    std::ostringstream msg;
    msg << "kernel weights for class " << label << " underflow at u=" << u << " with h=" << h;
    throw BandwidthUnderflow(msg.str());
  }
  return w / total;
}

namespace {

Eigen::MatrixXd weighted_centered_cov(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  const Eigen::RowVectorXd mu = w.transpose() * x;
  const Eigen::MatrixXd z = (x.rowwise() - mu).array().colwise() * w.array().sqrt();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  s.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  return s;
}

}  // namespace

Eigen::VectorXd nw_mean(const Dataset& ds, int label, double u, double h) {
  const Eigen::VectorXd w = class_kernel_weights(ds, label, u, h);
  return ds.class_features(label).transpose() * w;
}

Eigen::MatrixXd nw_class_cov(const Dataset& ds, int label, double u, double h) {
  const Eigen::VectorXd w = class_kernel_weights(ds, label, u, h);
  return weighted_centered_cov(ds.class_features(label), w);
}

LocalMoments local_moments(const Dataset& ds, double u, const Bandwidths& bw) {
  ds.require_classes(1, "local_moments");
  bw.validate();
  LocalMoments m;
  m.u = u;
  m.bandwidths = bw;
  Eigen::VectorXd mus[2];
  Eigen::MatrixXd sigmas[2];
  for (int label : {kClassOne, kClassTwo}) {
    const int c = slot(label);
    double raw = 0.0;
    const Eigen::VectorXd wm = class_kernel_weights(ds, label, u, bw.mean(label), &raw);
    m.class_weight_sums[static_cast<std::size_t>(c)] = raw;
    mus[c] = ds.class_features(label).transpose() * wm;
    sigmas[c] = nw_class_cov(ds, label, u, bw.cov(label));
  }
  m.mu1 = std::move(mus[0]);
  m.mu2 = std::move(mus[1]);
  m.sigma1 = std::move(sigmas[0]);
  m.sigma2 = std::move(sigmas[1]);
  m.sigma_pooled = ds.prior(kClassOne) * m.sigma1 + ds.prior(kClassTwo) * m.sigma2;
  m.delta = m.mu1 - m.mu2;
  return m;
}

LoocvErrors loocv_errors(const Dataset& ds, int label, double h) {
  const Eigen::MatrixXd& x = ds.class_features(label);
  const Eigen::VectorXd& u = ds.class_index(label);
  const Eigen::Index m = x.rows();
  if (m < 2) {
    throw Error(ErrorKind::shape, "leave-one-out criteria need at least 2 observations in class " +
                                      std::to_string(label));
  }
  if (!(h > 0.0)) throw Error(ErrorKind::domain, "kernel bandwidth must be positive");

  // Leave-one-out weights: row i holds the normalized weights of the other
  // class members at u_i.
  Eigen::MatrixXd w(m, m);
  std::vector<std::size_t> offending;
  const auto& rows = ds.class_rows(label);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) w(i, j) = i == j ? 0.0 : kernel_weight(u(j) - u(i), h);
    const double total = w.row(i).sum();
    if (!(total >= kWeightFloor)) {
      offending.push_back(static_cast<std::size_t>(rows[static_cast<std::size_t>(i)]));
      continue;
    }
    w.row(i) /= total;
  }
  if (!offending.empty()) {
    std::ostringstream msg;
    msg << "leave-one-out kernel weights underflow for " << offending.size() << " observation(s) of class "
        << label << " with h=" << h;
    throw BandwidthUnderflow(msg.str(), std::move(offending));
  }

  // Every quantity is a quadratic form in the class Gram matrix. Both
  // criteria are shift invariant, so center first to limit cancellation.
  const Eigen::MatrixXd y = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd g = y * y.transpose();
  const Eigen::MatrixXd pg = w * g;                        // row i: (G w_i)^T
  const Eigen::MatrixXd resid = g - pg;                    // row i: (G (e_i - w_i))^T
  const Eigen::MatrixXd hw = w * g.cwiseProduct(g);        // row i: ((G o G) w_i)^T

  const Eigen::VectorXd q = w.cwiseProduct(pg).rowwise().sum();
  const Eigen::VectorXd r2 = g.diagonal() - 2.0 * pg.diagonal() + q;
  const Eigen::VectorXd s_first = w.cwiseProduct(resid.cwiseProduct(resid)).rowwise().sum();
  const Eigen::VectorXd s_mean = w.cwiseProduct(resid).rowwise().sum();
  const Eigen::VectorXd rsr = s_first - s_mean.cwiseAbs2();
  const Eigen::VectorXd s_norm2 =
      w.cwiseProduct(hw).rowwise().sum() - 2.0 * w.cwiseProduct(pg.cwiseAbs2()).rowwise().sum() + q.cwiseAbs2();

  const double p = static_cast<double>(x.cols());
  const double scale = 1.0 / (p * p * static_cast<double>(m));
  LoocvErrors out;
  double cov_sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    cov_sum += std::max(0.0, r2(i) * r2(i) - 2.0 * rsr(i) + s_norm2(i));
  }
  out.mean = std::max(0.0, r2.sum()) * scale;
  out.cov = cov_sum * scale;
  return out;
}

double loocv_mean_error(const Dataset& ds, int label, double h) { return loocv_errors(ds, label, h).mean; }

double loocv_cov_error(const Dataset& ds, int label, double h) { return loocv_errors(ds, label, h).cov; }

std::vector<double> default_bandwidth_grid() {
  constexpr int count = 20;
  const double lo = std::log(0.02);
  const double hi = std::log(1.0);
  std::vector<double> grid(count);
  for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = std::exp(lo + (hi - lo) * k / (count - 1));
  grid.back() = 1.0;
  return grid;
}

void to_json(nlohmann::json& j, const BandwidthSelection& sel) {
  j = nlohmann::json::object();
  j["bandwidths"] = sel.bandwidths;
  auto& choices = j["choices"] = nlohmann::json::array();
  for (const auto& c : sel.choices) {
    choices.push_back({{"class", c.label},
                       {"criterion", c.criterion == Criterion::mean ? "mean" : "cov"},
                       {"h", c.h},
                       {"criterion_value", c.criterion_value}});
  }
  j["grid"] = sel.grid;
  auto curve = [](const std::vector<double>& v) {
    auto arr = nlohmann::json::array();
    for (double x : v) arr.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return arr;
  };
  j["curves"] = {{"class1", {{"mean", curve(sel.curves[0][0])}, {"cov", curve(sel.curves[0][1])}}},
                 {"class2", {{"mean", curve(sel.curves[1][0])}, {"cov", curve(sel.curves[1][1])}}}};
}

BandwidthSelection select_bandwidths(const Dataset& ds, std::vector<double> grid) {
  if (grid.empty()) throw Error(ErrorKind::usage, "bandwidth grid is empty");
  for (double h : grid)
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::domain, "bandwidth grid values must be positive");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  ds.require_classes(2, "select_bandwidths");

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  BandwidthSelection sel;
  sel.grid = grid;
  for (int label : {kClassOne, kClassTwo}) {
    const auto c = static_cast<std::size_t>(slot(label));
    auto& mean_curve = sel.curves[c][0];
    auto& cov_curve = sel.curves[c][1];
    mean_curve.assign(grid.size(), nan);
    cov_curve.assign(grid.size(), nan);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      try {
        const auto e = loocv_errors(ds, label, grid[k]);
        mean_curve[k] = e.mean;
        cov_curve[k] = e.cov;
      } catch (const BandwidthUnderflow&) {
      }
    }
    for (int crit = 0; crit < 2; ++crit) {
      const auto& curve = sel.curves[c][static_cast<std::size_t>(crit)];
      std::size_t best = grid.size();
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (std::isnan(curve[k])) continue;
        if (best == grid.size() || curve[k] < curve[best]) best = k;
      }
      if (best == grid.size()) {
        throw Error(ErrorKind::selection, std::string("every bandwidth in the grid failed for class ") +
                                              std::to_string(label) + (crit == 0 ? " (mean)" : " (cov)"));
      }
      const auto criterion = crit == 0 ? Criterion::mean : Criterion::cov;
      (crit == 0 ? sel.bandwidths.mean_h : sel.bandwidths.cov_h)[c] = grid[best];
      sel.choices.push_back({label, criterion, grid[best], curve[best]});
    }
  }
  return sel;
}

}  // namespace dspca
