#include "dspca/spectral.hpp"

#include <string>

#include "dspca/symmetric_top.hpp"

namespace dspca {

ProjectionBasis ProjectionBasis::truncated(Eigen::Index k) const {
  if (k < 1 || k > dim()) throw Error(ErrorKind::domain, "basis truncation out of range");
  return {vectors.leftCols(k), eigenvalues.head(k), u, rho};
}

void to_json(nlohmann::json& j, const ProjectionBasis& b) {
  std::vector<std::vector<double>> loadings(static_cast<std::size_t>(b.dim()));
  for (Eigen::Index c = 0; c < b.dim(); ++c) {
    loadings[static_cast<std::size_t>(c)].assign(b.vectors.col(c).data(), b.vectors.col(c).data() + b.vectors.rows());
  }
  j = {{"u", b.u},
       {"K", b.dim()},
       {"rho", b.rho},
       {"eigenvalues", std::vector<double>(b.eigenvalues.data(), b.eigenvalues.data() + b.eigenvalues.size())},
       {"loadings", loadings}};
}

const char* to_string(EigenStrategy s) noexcept {
  switch (s) {
    case EigenStrategy::direct: return "direct";
    case EigenStrategy::factor: return "factor";
    default: return "auto";
  }
}

EigenStrategy parse_strategy(const std::string& name) {
  if (name == "direct") return EigenStrategy::direct;
  if (name == "factor") return EigenStrategy::factor;
  if (name == "auto") return EigenStrategy::automatic;
  throw Error(ErrorKind::usage, "unknown eigen strategy '" + name + "' (direct, factor, auto)");
}

TotalCovariance total_cov(const LocalMoments& m, double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::domain, "rho must be nonnegative");
  if (m.delta.size() != m.sigma_pooled.rows()) throw Error(ErrorKind::shape, "total_cov: moment dimensions differ");
  TotalCovariance tc{m.sigma_pooled, rho, m.u};
  tc.matrix.selfadjointView<Eigen::Lower>().rankUpdate(m.delta, rho);
  tc.matrix.triangularView<Eigen::StrictlyUpper>() = tc.matrix.transpose();
  return tc;
}

Eigen::MatrixXd pooled_cov_factor(const Dataset& ds, double u, const Bandwidths& bw) {
  ds.require_classes(1, "pooled_cov_factor");
  Eigen::MatrixXd w(ds.n(), ds.p());
  for (int label : {kClassOne, kClassTwo}) {
    const Eigen::VectorXd weights = class_kernel_weights(ds, label, u, bw.cov(label));
    const Eigen::MatrixXd& x = ds.class_features(label);
    const Eigen::RowVectorXd mu = weights.transpose() * x;
    const double prior = ds.prior(label);
    const auto& rows = ds.class_rows(label);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double wk = weights(static_cast<Eigen::Index>(k));
      if (wk < 0.0) throw Error(ErrorKind::internal, "negative kernel weight");
      w.row(rows[k]) = std::sqrt(prior * wk) * (x.row(static_cast<Eigen::Index>(k)) - mu);
    }
  }
  return w;
}

FactorMatrix factor_matrix(const Dataset& ds, const LocalMoments& m, double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::domain, "rho must be nonnegative");
  if (m.delta.size() != ds.p()) throw Error(ErrorKind::shape, "factor_matrix: moments do not match the dataset");
  FactorMatrix fm{Eigen::MatrixXd(ds.n() + 1, ds.p()), rho, m.u};
  fm.rows.topRows(ds.n()) = pooled_cov_factor(ds, m.u, m.bandwidths);
  fm.rows.row(ds.n()) = std::sqrt(rho) * m.delta.transpose();
  return fm;
}

void normalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double a = std::abs(vectors(r, c));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

ProjectionBasis top_eigenvectors_direct(const Eigen::MatrixXd& symmetric, Eigen::Index k) {
  if (k < 1 || k > symmetric.rows()) {
    throw Error(ErrorKind::domain, "top_eigenvectors: K must lie in [1, p], got " + std::to_string(k));
  }
  auto top = top_symmetric_eigenpairs(symmetric, k);
  ProjectionBasis b;
  b.vectors = std::move(top.vectors);
  b.eigenvalues = std::move(top.values);
  normalize_signs(b.vectors);
  return b;
}

ProjectionBasis top_eigenvectors_factored(const Eigen::MatrixXd& factor, const Eigen::MatrixXd& factor_gram,
                                          Eigen::Index k) {
  if (k < 1 || k > factor.cols()) {
    throw Error(ErrorKind::domain, "top_eigenvectors: K must lie in [1, p], got " + std::to_string(k));
  }
  if (factor_gram.rows() != factor.rows()) throw Error(ErrorKind::shape, "top_eigenvectors: gram does not match factor");
  // at most n + 1 nonzero eigenvalues; larger K is reported as rank deficiency
  auto top = top_symmetric_eigenpairs(factor_gram, std::min(k, factor.rows()));
  const double largest = top.spectrum.size() ? top.spectrum(top.spectrum.size() - 1) : 0.0;
  const auto usable = static_cast<long>((top.spectrum.array() > kRankTolerance * largest).count());
  if (!(largest > 0.0) || usable < k) {
    throw RankDeficiency("top_eigenvectors: requested K=" + std::to_string(k) + " but only " +
                             std::to_string(largest > 0.0 ? usable : 0) + " nonzero eigenvalues",
                         largest > 0.0 ? usable : 0);
  }
  ProjectionBasis b;
  b.vectors = factor.transpose() * top.vectors;
  for (Eigen::Index c = 0; c < k; ++c) b.vectors.col(c).normalize();
  b.eigenvalues = std::move(top.values);
  normalize_signs(b.vectors);
  return b;
}

ProjectionBasis top_eigenvectors(const TotalCovariance& tc, Eigen::Index k) {
  auto b = top_eigenvectors_direct(tc.matrix, k);
  b.u = tc.u;
  b.rho = tc.rho;
  return b;
}

ProjectionBasis top_eigenvectors(const FactorMatrix& fm, Eigen::Index k, EigenStrategy strategy) {
  const Eigen::Index n_rows = fm.rows.rows();
  const Eigen::Index p = fm.rows.cols();
  if (strategy == EigenStrategy::automatic) strategy = p > n_rows ? EigenStrategy::factor : EigenStrategy::direct;
  ProjectionBasis b;
  if (strategy == EigenStrategy::factor) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_rows, n_rows);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(fm.rows);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    b = top_eigenvectors_factored(fm.rows, gram, k);
  } else {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(fm.rows.transpose());
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    b = top_eigenvectors_direct(cov, k);
  }
  b.u = fm.u;
  b.rho = fm.rho;
  return b;
}

}  // namespace dspca
