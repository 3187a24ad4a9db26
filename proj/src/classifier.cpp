#include "dspca/classifier.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "dspca/parallel.hpp"

namespace dspca {

const char* to_string(Variant v) noexcept { return v == Variant::lda ? "lda" : "qda"; }

Variant parse_variant(const std::string& name) {
  if (name == "lda" || name == "LDA") return Variant::lda;
  if (name == "qda" || name == "QDA") return Variant::qda;
  throw Error(ErrorKind::usage, "unknown variant '" + name + "' (lda, qda)");
}

const char* to_string(MomentSource m) noexcept {
  return m == MomentSource::kernel ? "kernel" : "projected-sample";
}

MomentSource parse_moment_source(const std::string& name) {
  if (name == "kernel") return MomentSource::kernel;
  if (name == "projected-sample") return MomentSource::projected_sample;
  throw Error(ErrorKind::usage, "unknown moment source '" + name + "' (kernel, projected-sample)");
}


void Hyperparameters::validate() const {
  bandwidths.validate();
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::domain, "rho must be nonnegative");
  if (K < 1) throw Error(ErrorKind::domain, "K must be at least 1");
}

void to_json(nlohmann::json& j, const Hyperparameters& hp) {
  j = {{"bandwidths", hp.bandwidths},
       {"rho", hp.rho},
       {"K", hp.K},
       {"variant", to_string(hp.variant)},
       {"strategy", to_string(hp.strategy)},
       {"moments", to_string(hp.moments)}};
}

void from_json(const nlohmann::json& j, Hyperparameters& hp) {
  j.at("bandwidths").get_to(hp.bandwidths);
  j.at("rho").get_to(hp.rho);
  j.at("K").get_to(hp.K);
  hp.variant = parse_variant(j.value("variant", std::string("lda")));
  hp.strategy = parse_strategy(j.value("strategy", std::string("auto")));
  hp.moments = parse_moment_source(j.value("moments", std::string("kernel")));
  hp.validate();
}

Eigen::LLT<Eigen::MatrixXd> regularized_cholesky(const Eigen::MatrixXd& s, Eigen::MatrixXd* regularized) {
  const Eigen::Index k = s.rows();
  const double trace = s.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) {
    throw Error(ErrorKind::not_positive_definite, "projected covariance has nonpositive trace");
  }
  for (double eps = kRidgeStart; eps <= kRidgeMax * (1.0 + 1e-9); eps *= 10.0) {
    Eigen::MatrixXd r = s;
    r.diagonal().array() += eps * trace / static_cast<double>(k);
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      if (regularized) *regularized = std::move(r);
      return llt;
    }
  }
  throw Error(ErrorKind::not_positive_definite, "projected covariance stays indefinite after ridge regularization");
}

namespace {

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

DiscriminantRule make_rule(ProjectionBasis basis, Eigen::VectorXd proj_mu1, Eigen::VectorXd proj_mu2,
                           Eigen::MatrixXd proj_sigma_pooled, Eigen::MatrixXd proj_sigma1,
                           Eigen::MatrixXd proj_sigma2, double log_prior_ratio, Variant variant) {
  DiscriminantRule r;
  r.u = basis.u;
  r.variant = variant;
  r.basis = std::move(basis);
  r.proj_mu1 = std::move(proj_mu1);
  r.proj_mu2 = std::move(proj_mu2);
  r.log_prior_ratio = log_prior_ratio;
  if (variant == Variant::lda) {
    r.pooled_llt = regularized_cholesky(proj_sigma_pooled, &r.proj_sigma_pooled);
    r.lda_direction = r.pooled_llt.solve(r.proj_mu1 - r.proj_mu2);
  } else {
    r.llt1 = regularized_cholesky(proj_sigma1, &r.proj_sigma1);
    r.llt2 = regularized_cholesky(proj_sigma2, &r.proj_sigma2);
    r.log_det1 = log_det(r.llt1);
    r.log_det2 = log_det(r.llt2);
  }
  return r;
}

double score_projected(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != rule.dim()) throw Error(ErrorKind::shape, "projected query has the wrong dimension");
  if (rule.variant == Variant::lda) {
    return (z - 0.5 * (rule.proj_mu1 + rule.proj_mu2)).dot(rule.lda_direction) + rule.log_prior_ratio;
  }
  const double q1 = rule.llt1.matrixL().solve(z - rule.proj_mu1).squaredNorm();
  const double q2 = rule.llt2.matrixL().solve(z - rule.proj_mu2).squaredNorm();
  return -0.5 * q1 + 0.5 * q2 - 0.5 * rule.log_det1 + 0.5 * rule.log_det2 + rule.log_prior_ratio;
}

namespace {

Eigen::VectorXd project_query(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != rule.basis.vectors.rows()) throw Error(ErrorKind::shape, "query has the wrong feature count");
  return rule.basis.vectors.transpose() * x;
}

}  // namespace

double lda_score(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (rule.variant != Variant::lda) throw Error(ErrorKind::domain, "lda_score needs an LDA rule");
  return score_projected(rule, project_query(rule, x));
}

double qda_score(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (rule.variant != Variant::qda) throw Error(ErrorKind::domain, "qda_score needs a QDA rule");
  return score_projected(rule, project_query(rule, x));
}

double score(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return score_projected(rule, project_query(rule, x));
}

DiscriminantRule ProjectedMoments::rule(Eigen::Index k, Variant variant) const {
  if (k < 1 || k > basis.dim()) throw Error(ErrorKind::domain, "rule dimension out of range");
  if (variant == Variant::lda) {
    return make_rule(basis.truncated(k), mu1.head(k), mu2.head(k), pooled.topLeftCorner(k, k), {}, {},
                     log_prior_ratio, variant);
  }
  return make_rule(basis.truncated(k), mu1.head(k), mu2.head(k), {}, sigma1.topLeftCorner(k, k),
                   sigma2.topLeftCorner(k, k), log_prior_ratio, variant);
}

LocalEstimate::LocalEstimate(const Dataset& train, double u, const Bandwidths& bw, EigenStrategy strategy)
    : train_(&train), u_(u) {
  train.require_classes(1, "local estimate");
  bw.validate();
  mu1_ = nw_mean(train, kClassOne, u, bw.mean(kClassOne));
  mu2_ = nw_mean(train, kClassTwo, u, bw.mean(kClassTwo));
  delta_ = mu1_ - mu2_;
  factor_ = pooled_cov_factor(train, u, bw);
  const Eigen::Index n = train.n();
  const Eigen::Index p = train.p();
  factor_path_ = strategy == EigenStrategy::factor || (strategy == EigenStrategy::automatic && p > n + 1);
  if (factor_path_) {
    gram_ = Eigen::MatrixXd::Zero(n, n);
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(factor_);
    gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
    factor_delta_ = factor_ * delta_;
  } else {
    pooled_ = Eigen::MatrixXd::Zero(p, p);
    pooled_.selfadjointView<Eigen::Lower>().rankUpdate(factor_.transpose());
    pooled_.triangularView<Eigen::StrictlyUpper>() = pooled_.transpose();
  }
}

ProjectionBasis LocalEstimate::basis(double rho, Eigen::Index k) const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::domain, "rho must be nonnegative");
  ProjectionBasis b;
  if (factor_path_) {
    const Eigen::Index n = factor_.rows();
    const double root = std::sqrt(rho);
    Eigen::MatrixXd a(n + 1, factor_.cols());
    a.topRows(n) = factor_;
    a.row(n) = root * delta_.transpose();
    Eigen::MatrixXd gram(n + 1, n + 1);
    gram.topLeftCorner(n, n) = gram_;
    gram.col(n).head(n) = root * factor_delta_;
    gram.row(n).head(n) = root * factor_delta_.transpose();
    gram(n, n) = rho * delta_.squaredNorm();
    b = top_eigenvectors_factored(a, gram, k);
  } else {
    Eigen::MatrixXd t = pooled_;
    t.selfadjointView<Eigen::Lower>().rankUpdate(delta_, rho);
    t.triangularView<Eigen::StrictlyUpper>() = t.transpose();
    b = top_eigenvectors_direct(t, k);
  }
  b.u = u_;
  b.rho = rho;
  return b;
}

ProjectedMoments LocalEstimate::project(const ProjectionBasis& basis, MomentSource source) const {
  const Dataset& ds = *train_;
  const Eigen::MatrixXd& b = basis.vectors;
  ProjectedMoments pm;
  pm.basis = basis;
  pm.log_prior_ratio = std::log(static_cast<double>(ds.n1()) / static_cast<double>(ds.n2()));
  const Eigen::Index k = b.cols();
  if (source == MomentSource::kernel) {
    pm.mu1 = b.transpose() * mu1_;
    pm.mu2 = b.transpose() * mu2_;
    const Eigen::MatrixXd z = factor_ * b;
    pm.pooled = z.transpose() * z;
    Eigen::MatrixXd* sig[2] = {&pm.sigma1, &pm.sigma2};
    for (int label : {kClassOne, kClassTwo}) {
      const auto& rows = ds.class_rows(label);
      Eigen::MatrixXd zc(static_cast<Eigen::Index>(rows.size()), k);
      for (std::size_t r = 0; r < rows.size(); ++r) zc.row(static_cast<Eigen::Index>(r)) = z.row(rows[r]);
      *sig[slot(label)] = zc.transpose() * zc / ds.prior(label);
    }
  } else {
    ds.require_classes(2, "projected sample moments");
    pm.pooled = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd* mus[2] = {&pm.mu1, &pm.mu2};
    Eigen::MatrixXd* sig[2] = {&pm.sigma1, &pm.sigma2};
    for (int label : {kClassOne, kClassTwo}) {
      const Eigen::MatrixXd zc = ds.class_features(label) * b;
      const Eigen::RowVectorXd mean = zc.colwise().mean();
      const Eigen::MatrixXd centered = zc.rowwise() - mean;
      const Eigen::MatrixXd scatter = centered.transpose() * centered;
      *mus[slot(label)] = mean.transpose();
      *sig[slot(label)] = scatter / static_cast<double>(zc.rows() - 1);
      pm.pooled += scatter;
    }
    pm.pooled /= static_cast<double>(ds.n() - 2);
  }
  return pm;
}

DiscriminantRule local_rule(const Dataset& train, double u, const Hyperparameters& hp) {
  hp.validate();
  const LocalEstimate est(train, u, hp.bandwidths, hp.strategy);
  return est.project(est.basis(hp.rho, hp.K), hp.moments).rule(hp.K, hp.variant);
}

PredictionBatch predict(const Dataset& train, const Eigen::MatrixXd& features, const Eigen::VectorXd& index,
                        const Hyperparameters& hp, unsigned threads) {
  hp.validate();
  if (features.rows() != index.size()) throw Error(ErrorKind::shape, "predict: features and index lengths differ");
  if (features.cols() != train.p()) {
    throw Error(ErrorKind::shape, "predict: queries have " + std::to_string(features.cols()) +
                                      " features, training data has " + std::to_string(train.p()));
  }
  const Eigen::Index m = features.rows();

  std::unordered_map<std::uint64_t, std::size_t> slot_of;
  std::vector<double> distinct;
  std::vector<std::size_t> query_slot(static_cast<std::size_t>(m));
  for (Eigen::Index q = 0; q < m; ++q) {
    const double u = index(q);
    const auto key = std::bit_cast<std::uint64_t>(u);
    auto [it, inserted] = slot_of.try_emplace(key, distinct.size());
    if (inserted) distinct.push_back(u);
    query_slot[static_cast<std::size_t>(q)] = it->second;
  }

  struct Built {
    std::optional<DiscriminantRule> rule;
    ErrorKind kind = ErrorKind::internal;
    std::string message;
  };
  std::vector<Built> rules(distinct.size());
  parallel_for(distinct.size(), threads, [&](std::size_t s) {
    try {
      if (!std::isfinite(distinct[s])) throw Error(ErrorKind::domain, "query index is not finite");
      rules[s].rule = local_rule(train, distinct[s], hp);
    } catch (const Error& e) {
      rules[s].kind = e.kind();
      rules[s].message = e.what();
    }
  });

  PredictionBatch batch;
  batch.distinct_indices = distinct.size();
  batch.predictions.resize(static_cast<std::size_t>(m));
  for (Eigen::Index q = 0; q < m; ++q) {
    const Built& b = rules[query_slot[static_cast<std::size_t>(q)]];
    if (!b.rule) {
      batch.failures.push_back({q, b.kind, b.message});
      continue;
    }
    const double s = score(*b.rule, features.row(q).transpose());
    batch.predictions[static_cast<std::size_t>(q)] = Prediction{index(q), s, label_from_score(s)};
  }
  if (m > 0 && batch.failures.size() == static_cast<std::size_t>(m)) {
    throw Error(batch.failures.front().kind, "predict: every query failed; first failure: " +
                                                 batch.failures.front().message);
  }
  return batch;
}

}  // namespace dspca
