#include "dspca/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "dspca/parallel.hpp"
#include "dspca/random.hpp"

namespace dspca {

Eigen::MatrixXd ar_covariance(Eigen::Index p, double a) {
  Eigen::MatrixXd s(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i) s(i, j) = i == j ? 1.0 : std::pow(a, static_cast<double>(std::abs(i - j)));
  return s;
}

Eigen::MatrixXd equicorrelation_covariance(Eigen::Index p, double u) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(p, p, u);
  s.diagonal().array() += 1.0 - u;
  return s;
}

namespace {

// x_1 = z_1, x_j = a x_{j-1} + sqrt(1 - a^2) z_j: the Cholesky factor of u^|i-j|.
void ar_draw(double a, const Eigen::Ref<const Eigen::VectorXd>& z, Eigen::Ref<Eigen::VectorXd> out) {
  const double s = std::sqrt(std::max(0.0, 1.0 - a * a));
  out(0) = z(0);
  for (Eigen::Index j = 1; j < out.size(); ++j) out(j) = a * out(j - 1) + s * z(j);
}

// sqrt(u) z_0 1 + sqrt(1 - u) z_{1..p}.
void equicorrelation_draw(double u, const Eigen::Ref<const Eigen::VectorXd>& z, Eigen::Ref<Eigen::VectorXd> out) {
  const double shared = std::sqrt(std::max(0.0, u)) * z(0);
  const double own = std::sqrt(std::max(0.0, 1.0 - u));
  out = (own * z.tail(out.size())).array() + shared;
}

enum class CovKind { ar_half, ar_u, equicorrelation };

Eigen::MatrixXd cov_of(CovKind kind, Eigen::Index p, double u) {
  switch (kind) {
    case CovKind::ar_half: return ar_covariance(p, 0.5);
    case CovKind::ar_u: return ar_covariance(p, u);
    default: return equicorrelation_covariance(p, u);
  }
}

void draw_of(CovKind kind, double u, const Eigen::Ref<const Eigen::VectorXd>& z, Eigen::Ref<Eigen::VectorXd> out) {
  switch (kind) {
    case CovKind::ar_half: ar_draw(0.5, z.head(out.size()), out); break;
    case CovKind::ar_u: ar_draw(u, z.head(out.size()), out); break;
    default: equicorrelation_draw(u, z, out); break;
  }
}

}  // namespace

Eigen::MatrixXd SimulationModelSpec::factor_matrix(int label, double u) const {
  if (!factor) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov(label, u));
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::generation, "covariance is not positive definite at u = " + std::to_string(u));
    }
    return llt.matrixL();
  }
  Eigen::MatrixXd f(p, factor_width);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(factor_width);
  Eigen::VectorXd col(p);
  for (Eigen::Index k = 0; k < factor_width; ++k) {
    e(k) = 1.0;
    factor(label, u, e, col);
    f.col(k) = col;
    e(k) = 0.0;
  }
  return f;
}

SimulationModelSpec model_spec(int model_id, Eigen::Index p) {
  if (model_id < 1 || model_id > 6) {
    throw Error(ErrorKind::usage, "model id must be in 1..6, got " + std::to_string(model_id));
  }
  if (p < 1 || (model_id != 5 && p < 20)) {
    throw Error(ErrorKind::domain, "model " + std::to_string(model_id) + " needs p >= " +
                                       (model_id == 5 ? std::string("1") : std::string("20")));
  }
  using Vec = Eigen::VectorXd;
  SimulationModelSpec spec;
  spec.model_id = model_id;
  spec.p = p;
  std::array<CovKind, 2> kinds{};
  switch (model_id) {
    case 1:
      spec.mean_fn = [p](int label, double) {
        Vec m = Vec::Ones(p);
        if (label == kClassTwo) m.head(20).setZero();
        return m;
      };
      kinds = {CovKind::ar_half, CovKind::ar_half};
      break;
    case 2:
      spec.mean_fn = [p](int label, double u) {
        Vec m = Vec::Constant(p, std::exp(u));
        if (label == kClassTwo) m.head(20).setConstant(u);
        return m;
      };
      kinds = {CovKind::ar_u, CovKind::ar_u};
      break;
    case 3:
      spec.mean_fn = [p](int label, double u) {
        Vec m = Vec::Constant(p, u);
        if (label == kClassTwo) m.head(20).setConstant(-u);
        return m;
      };
      kinds = {CovKind::equicorrelation, CovKind::equicorrelation};
      break;
    case 4:
    case 6:
      spec.mean_fn = [p](int label, double u) {
        Vec m = Vec::Constant(p, u);
        if (label == kClassTwo) m.head(p - 20).setConstant(-u);
        return m;
      };
      kinds = model_id == 4 ? std::array{CovKind::equicorrelation, CovKind::equicorrelation}
                            : std::array{CovKind::ar_u, CovKind::equicorrelation};
      break;
    default:
      spec.mean_fn = [p](int label, double u) { return Vec::Constant(p, label == kClassOne ? u : std::sin(4.0 * u)); };
      kinds = {CovKind::equicorrelation, CovKind::equicorrelation};
      break;
  }
  spec.equal_cov = kinds[0] == kinds[1];
  spec.cov_fn = [p, kinds](int label, double u) { return cov_of(kinds[static_cast<std::size_t>(slot(label))], p, u); };
  const bool any_equicorrelation = kinds[0] == CovKind::equicorrelation || kinds[1] == CovKind::equicorrelation;
  spec.factor_width = any_equicorrelation ? p + 1 : p;
  spec.factor = [kinds](int label, double u, const Eigen::Ref<const Eigen::VectorXd>& z,
                        Eigen::Ref<Eigen::VectorXd> out) {
    const CovKind kind = kinds[static_cast<std::size_t>(slot(label))];
    // AR draws use the first p entries; a wider z is shared with the
    // equicorrelated class.
    if (kind == CovKind::equicorrelation) {
      draw_of(kind, u, z, out);
    } else {
      draw_of(kind, u, z.head(out.size()), out);
    }
  };
  return spec;
}

Dataset generate(const SimulationModelSpec& spec, Eigen::Index n1, Eigen::Index n2, std::uint64_t seed) {
  if (n1 < 1 || n2 < 1) throw Error(ErrorKind::domain, "generate: n1 and n2 must be at least 1");
  if (!spec.mean_fn || !spec.cov_fn || spec.p < 1) throw Error(ErrorKind::generation, "generate: incomplete model spec");
  const Eigen::Index n = n1 + n2;
  const Eigen::Index p = spec.p;
  auto rng = make_stream(seed, {0x67656eULL});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;

  Eigen::VectorXd u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = unif(rng);

  const Eigen::Index width = spec.factor ? spec.factor_width : p;
  Eigen::MatrixXd x(n, p);
  std::vector<int> labels(static_cast<std::size_t>(n));
  Eigen::VectorXd z(width);
  Eigen::VectorXd noise(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = i < n1 ? kClassOne : kClassTwo;
    labels[static_cast<std::size_t>(i)] = label;
    for (Eigen::Index k = 0; k < width; ++k) z(k) = normal(rng);
    if (spec.factor) {
      spec.factor(label, u(i), z, noise);
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(spec.cov(label, u(i)));
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::generation, "covariance is not positive definite at u = " + std::to_string(u(i)));
      }
      noise.noalias() = llt.matrixL() * z;
    }
    x.row(i) = (spec.mean(label, u(i)) + noise).transpose();
  }
  return Dataset(std::move(x), std::move(u), std::move(labels));
}

double oracle_score(const SimulationModelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x, double u) {
  const Eigen::VectorXd mu1 = spec.mean(kClassOne, u);
  const Eigen::VectorXd mu2 = spec.mean(kClassTwo, u);
  if (spec.equal_cov) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(spec.cov(kClassOne, u));
    const Eigen::VectorXd beta = ldlt.solve(mu1 - mu2);
    return (x - 0.5 * (mu1 + mu2)).dot(beta);
  }
  auto half_log_density = [&](int label, const Eigen::VectorXd& mu) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(spec.cov(label, u));
    const Eigen::VectorXd r = x - mu;
    const double log_det = ldlt.vectorD().array().log().sum();
    return -0.5 * (log_det + r.dot(ldlt.solve(r)));
  };
  return half_log_density(kClassOne, mu1) - half_log_density(kClassTwo, mu2);
}

std::vector<int> oracle_predict(const SimulationModelSpec& spec, const Eigen::MatrixXd& features,
                                const Eigen::VectorXd& index) {
  if (features.rows() != index.size()) throw Error(ErrorKind::shape, "oracle_predict: row count mismatch");
  if (features.cols() != spec.p) throw Error(ErrorKind::shape, "oracle_predict: feature count mismatch");
  std::vector<int> labels(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    labels[static_cast<std::size_t>(i)] = label_from_score(oracle_score(spec, features.row(i).transpose(), index(i)));
  }
  return labels;
}

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::oracle: return "Oracle";
    case Method::dspca_lda: return "DSPCALDA";
    default: return "DSPCAQDA";
  }
}

Method parse_method(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "oracle") return Method::oracle;
  if (lower == "dspcalda" || lower == "lda") return Method::dspca_lda;
  if (lower == "dspcaqda" || lower == "qda") return Method::dspca_qda;
  throw Error(ErrorKind::usage, "unknown method '" + name + "' (oracle, dspcalda, dspcaqda)");
}

void BenchmarkConfig::validate() const {
  model_spec(model_id, p);
  if (n1 < 2 || n2 < 2) throw Error(ErrorKind::usage, "benchmark: need at least 2 observations per class");
  if (reps < 2) throw Error(ErrorKind::usage, "benchmark: reps must be at least 2 (standard error undefined)");
  if (methods.empty()) throw Error(ErrorKind::usage, "benchmark: no methods selected");
  if (bandwidth_grid.empty()) throw Error(ErrorKind::usage, "benchmark: bandwidth grid is empty");
  tuning.validate();
}

void to_json(nlohmann::json& j, const BenchmarkConfig& c) {
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.emplace_back(to_string(m));
  j = {{"model", c.model_id},
       {"p", c.p},
       {"n1", c.n1},
       {"n2", c.n2},
       {"reps", c.reps},
       {"methods", methods},
       {"seed", c.seed},
       {"bandwidth_grid", c.bandwidth_grid},
       {"rhos", c.tuning.rhos},
       {"k_max", c.tuning.k_max},
       {"folds", c.tuning.folds},
       {"strategy", to_string(c.strategy)},
       {"moments", to_string(c.moments)}};
}

void from_json(const nlohmann::json& j, BenchmarkConfig& c) {
  c.model_id = j.at("model").get<int>();
  c.p = j.at("p").get<Eigen::Index>();
  c.n1 = j.value("n1", Eigen::Index{100});
  c.n2 = j.value("n2", Eigen::Index{100});
  c.reps = j.at("reps").get<int>();
  c.methods.clear();
  for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("bandwidth_grid")) c.bandwidth_grid = j.at("bandwidth_grid").get<std::vector<double>>();
  if (j.contains("rhos")) c.tuning.rhos = j.at("rhos").get<std::vector<double>>();
  c.tuning.k_max = j.value("k_max", Eigen::Index{5});
  c.tuning.folds = j.value("folds", 5);
  c.strategy = parse_strategy(j.value("strategy", std::string("auto")));
  c.moments = parse_moment_source(j.value("moments", std::string("kernel")));
}

const MethodSummary& BenchmarkResult::method(Method m) const {
  for (const auto& s : methods)
    if (s.method == m) return s;
  throw Error(ErrorKind::usage, std::string("benchmark result has no column for ") + to_string(m));
}

void to_json(nlohmann::json& j, const BenchmarkResult& r) {
  auto methods = nlohmann::json::array();
  for (const auto& m : r.methods) {
    auto errors = nlohmann::json::array();
    for (double e : m.errors) errors.push_back(std::isnan(e) ? nlohmann::json(nullptr) : nlohmann::json(e));
    methods.push_back({{"method", to_string(m.method)},
                       {"mean", m.mean},
                       {"se", m.se},
                       {"mean_seconds", m.mean_seconds},
                       {"failed", m.failed},
                       {"errors", errors},
                       {"seconds", m.seconds}});
  }
  j = {{"config", r.config}, {"methods", methods}, {"warnings", r.warnings}};
}

std::string benchmark_table(const std::vector<BenchmarkResult>& results) {
  std::ostringstream out;
  if (results.empty()) return {};
  out << "p";
  for (const auto& m : results.front().methods) out << ',' << to_string(m.method);
  out << '\n';
  char cell[64];
  for (const auto& r : results) {
    out << r.config.p;
    for (const auto& m : r.methods) {
      std::snprintf(cell, sizeof cell, "%.3f(%.3f)", m.mean, m.se);
      out << ',' << cell;
    }
    out << '\n';
  }
  return out.str();
}

namespace {

struct ReplicateOutcome {
  std::vector<double> errors;
  std::vector<double> seconds;
  std::vector<std::string> failures;
};

double misclassification(const std::vector<int>& predicted, const std::vector<int>& truth) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ReplicateOutcome run_replicate(const BenchmarkConfig& config, const SimulationModelSpec& spec, int rep) {
  const std::size_t n_methods = config.methods.size();
  ReplicateOutcome out{std::vector<double>(n_methods, std::numeric_limits<double>::quiet_NaN()),
                       std::vector<double>(n_methods, std::numeric_limits<double>::quiet_NaN()),
                       {}};
  auto stream = make_stream(config.seed, {0x726570ULL, static_cast<std::uint64_t>(rep)});
  const std::uint64_t train_seed = stream();
  const std::uint64_t test_seed = stream();
  const std::uint64_t cv_seed = stream();

  const Dataset train = generate(spec, config.n1, config.n2, train_seed);
  const Dataset test = generate(spec, config.n1, config.n2, test_seed);

  std::vector<Variant> variants;
  for (Method m : config.methods) {
    if (m == Method::dspca_lda) variants.push_back(Variant::lda);
    if (m == Method::dspca_qda) variants.push_back(Variant::qda);
  }

  // Shared tuning for the DSPCA methods.
  double shared_seconds = 0.0;
  std::vector<CvReport> reports;
  std::optional<Bandwidths> bandwidths;
  std::string shared_failure;
  if (!variants.empty()) {
    const auto start = std::chrono::steady_clock::now();
    try {
      bandwidths = select_bandwidths(train, config.bandwidth_grid).bandwidths;
      TuningGrid grid = config.tuning;
      grid.seed = cv_seed;
      reports = cv_select(train, *bandwidths, grid, variants, {config.strategy, config.moments, 1});
    } catch (const Error& e) {
      shared_failure = e.what();
    }
    shared_seconds = seconds_since(start);
  }

  for (std::size_t k = 0; k < n_methods; ++k) {
    const Method m = config.methods[k];
    const auto start = std::chrono::steady_clock::now();
    try {
      std::vector<int> predicted;
      if (m == Method::oracle) {
        predicted = oracle_predict(spec, test.features(), test.index());
      } else {
        if (!shared_failure.empty()) throw Error(ErrorKind::tuning, shared_failure);
        const Variant v = m == Method::dspca_lda ? Variant::lda : Variant::qda;
        const auto it = std::find(variants.begin(), variants.end(), v);
        const CvReport& rep_cv = reports[static_cast<std::size_t>(it - variants.begin())];
        Hyperparameters hp;
        hp.bandwidths = *bandwidths;
        hp.rho = rep_cv.chosen_rho;
        hp.K = rep_cv.chosen_K;
        hp.variant = v;
        hp.strategy = config.strategy;
        hp.moments = config.moments;
        const PredictionBatch batch = predict(train, test.features(), test.index(), hp, 1);
        predicted.resize(batch.predictions.size());
        // A query without a rule counts as misclassified.
        for (std::size_t q = 0; q < predicted.size(); ++q) {
          const auto& pr = batch.predictions[q];
          predicted[q] = pr ? pr->label : (test.labels()[q] == kClassOne ? kClassTwo : kClassOne);
        }
      }
      out.errors[k] = misclassification(predicted, test.labels());
      out.seconds[k] = seconds_since(start) + (m == Method::oracle ? 0.0 : shared_seconds);
    } catch (const Error& e) {
      out.failures.push_back("replicate " + std::to_string(rep) + ", " + to_string(m) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  const SimulationModelSpec spec = model_spec(config.model_id, config.p);
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<ReplicateOutcome> outcomes(reps);
  parallel_for(reps, config.threads, [&](std::size_t r) { outcomes[r] = run_replicate(config, spec, static_cast<int>(r)); });

  BenchmarkResult result;
  result.config = config;
  for (const auto& o : outcomes)
    for (const auto& f : o.failures) result.warnings.push_back(f);

  for (std::size_t k = 0; k < config.methods.size(); ++k) {
    MethodSummary s;
    s.method = config.methods[k];
    double sum = 0.0, time_sum = 0.0;
    std::vector<double> ok;
    for (const auto& o : outcomes) {
      s.errors.push_back(o.errors[k]);
      s.seconds.push_back(o.seconds[k]);
      if (std::isnan(o.errors[k])) {
        ++s.failed;
      } else {
        ok.push_back(o.errors[k]);
        sum += o.errors[k];
        time_sum += o.seconds[k];
      }
    }
    if (static_cast<double>(s.failed) >= 0.05 * static_cast<double>(reps) || ok.size() < 2) {
      throw Error(ErrorKind::benchmark, std::string(to_string(s.method)) + ": " + std::to_string(s.failed) + " of " +
                                            std::to_string(reps) + " replicates failed");
    }
    const auto m = static_cast<double>(ok.size());
    s.mean = sum / m;
    s.mean_seconds = time_sum / m;
    double ss = 0.0;
    for (double e : ok) ss += (e - s.mean) * (e - s.mean);
    s.se = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
    if (s.failed > 0) {
      result.warnings.push_back(std::string(to_string(s.method)) + ": excluded " + std::to_string(s.failed) +
                                " failed replicates");
    }
    result.methods.push_back(std::move(s));
  }
  return result;
}

}  // namespace dspca
