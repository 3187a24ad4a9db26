#include <doctest.h>

#include <cmath>

#include "dspca/simulation.hpp"

using namespace dspca;

TEST_CASE("model means and covariances") {
  const SimulationModelSpec m1 = model_spec(1, 30);
  CHECK(m1.mean(1, 0.3) == Eigen::VectorXd::Ones(30));
  CHECK(m1.mean(2, 0.9).head(20).isZero(0.0));
  CHECK(m1.mean(2, 0.9).tail(10) == Eigen::VectorXd::Ones(10));
  CHECK(m1.cov(1, 0.2)(3, 5) == doctest::Approx(0.25));

  const SimulationModelSpec m4 = model_spec(4, 30);
  CHECK(m4.mean(2, 0.5).head(10) == Eigen::VectorXd::Constant(10, -0.5));
  CHECK(m4.mean(2, 0.5).tail(20) == Eigen::VectorXd::Constant(20, 0.5));

  const SimulationModelSpec m5 = model_spec(5, 3);
  CHECK(m5.mean(2, 0.25)(1) == doctest::Approx(std::sin(1.0)));
  CHECK(m5.cov(1, 0.25)(0, 1) == doctest::Approx(0.25));
  CHECK(m5.cov(1, 0.25)(2, 2) == doctest::Approx(1.0));

  CHECK(model_spec(6, 25).equal_cov == false);
  for (int id = 1; id <= 5; ++id) CHECK(model_spec(id, 25).equal_cov);
  CHECK_THROWS_AS(model_spec(7, 100), Error);
  CHECK_THROWS_AS(model_spec(1, 10), Error);
}

TEST_CASE("fast samplers factor the model covariance") {
  for (int id = 1; id <= 6; ++id) {
    const SimulationModelSpec spec = model_spec(id, 25);
    for (double u : {0.0, 0.1, 0.5, 0.9, 0.999}) {
      for (int label : {1, 2}) {
        const Eigen::MatrixXd f = spec.factor_matrix(label, u);
        const Eigen::MatrixXd s = spec.cov(label, u);
        CHECK((f * f.transpose() - s).norm() < 1e-12 * s.norm());
        if (u > 0.0 && u < 1.0) {
          CHECK(Eigen::LLT<Eigen::MatrixXd>(s).info() == Eigen::Success);
        }
      }
    }
  }
}

TEST_CASE("generate: counts, index range, determinism") {
  const SimulationModelSpec spec = model_spec(3, 20);
  const Dataset a = generate(spec, 7, 5, 99);
  CHECK(a.n1() == 7);
  CHECK(a.n2() == 5);
  CHECK(a.index().minCoeff() >= 0.0);
  CHECK(a.index().maxCoeff() <= 1.0);
  const Dataset b = generate(spec, 7, 5, 99);
  CHECK(a.features() == b.features());
  CHECK(a.index() == b.index());
  CHECK(generate(spec, 7, 5, 100).features() != a.features());
  CHECK_THROWS_AS(generate(spec, 0, 5, 1), Error);
}

TEST_CASE("custom specs fall back to a Cholesky factor") {
  SimulationModelSpec spec;
  spec.p = 3;
  spec.mean_fn = [](int label, double u) { return Eigen::VectorXd::Constant(3, label == 1 ? u : -u); };
  spec.cov_fn = [](int, double u) { return ar_covariance(3, 0.3 * u); };
  const Dataset ds = generate(spec, 4, 4, 1);
  CHECK(ds.n() == 8);
  spec.cov_fn = [](int, double) { return Eigen::MatrixXd::Zero(3, 3); };
  CHECK_THROWS_AS(generate(spec, 4, 4, 1), Error);
}

TEST_CASE("sample moments at a fixed index") {
  SimulationModelSpec spec = model_spec(1, 20);
  const Dataset ds = generate(spec, 20000, 1, 5);
  const Eigen::MatrixXd& x = ds.class_features(1);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  const Eigen::MatrixXd s = c.transpose() * c / static_cast<double>(x.rows() - 1);
  const Eigen::MatrixXd sigma = ar_covariance(20, 0.5);
  CHECK((s - sigma).topLeftCorner(5, 5).cwiseAbs().maxCoeff() < 0.02);
  // Gaussian sample covariance: var(s_ij) = (sigma_ij^2 + sigma_ii sigma_jj) / (n - 1)
  for (Eigen::Index j = 0; j < 20; ++j) {
    for (Eigen::Index i = 0; i < 20; ++i) {
      const double se = std::sqrt((sigma(i, j) * sigma(i, j) + 1.0) / static_cast<double>(x.rows() - 1));
      CHECK(std::abs(s(i, j) - sigma(i, j)) <= 5.0 * se);
    }
  }

  for (int id = 1; id <= 6; ++id) {
    const SimulationModelSpec m = model_spec(id, 20);
    for (double u : {0.1, 0.5, 0.9}) {
      SimulationModelSpec fixed = m;
      fixed.mean_fn = [m, u](int label, double) { return m.mean(label, u); };
      fixed.cov_fn = [m, u](int label, double) { return m.cov(label, u); };
      fixed.factor = [m, u](int label, double, const Eigen::Ref<const Eigen::VectorXd>& z,
                            Eigen::Ref<Eigen::VectorXd> out) { m.factor(label, u, z, out); };
      const Dataset draws = generate(fixed, 5000, 5000, static_cast<std::uint64_t>(id * 10 + u * 10));
      for (int label : {1, 2}) {
        const Eigen::VectorXd emp = draws.class_features(label).colwise().mean().transpose();
        const Eigen::VectorXd se = (m.cov(label, u).diagonal() / 5000.0).cwiseSqrt();
        CHECK(((emp - m.mean(label, u)).cwiseAbs().array() <= 5.0 * se.array()).all());
      }
    }
  }
}

TEST_CASE("oracle rule") {
  for (int id = 1; id <= 5; ++id) {
    const SimulationModelSpec spec = model_spec(id, 25);
    const double u = 0.37;
    const Eigen::VectorXd mu1 = spec.mean(1, u), mu2 = spec.mean(2, u);
    CHECK(oracle_score(spec, mu1, u) > 0.0);
    CHECK(std::abs(oracle_score(spec, 0.5 * (mu1 + mu2), u)) < 1e-10);
    Eigen::MatrixXd q(1, 25);
    q.row(0) = (0.5 * (mu1 + mu2)).transpose();
    Eigen::VectorXd uq = Eigen::VectorXd::Constant(1, u);
    // a midpoint score of exactly zero goes to class 1; allow rounding either way
    const int label = oracle_predict(spec, q, uq)[0];
    CHECK((label == 1 || std::abs(oracle_score(spec, q.row(0).transpose(), u)) < 1e-10));

    // swapping the classes negates the score
    SimulationModelSpec swapped = spec;
    swapped.mean_fn = [spec](int label, double v) { return spec.mean(3 - label, v); };
    const Eigen::VectorXd x = mu1 + 0.3 * Eigen::VectorXd::Ones(25);
    CHECK(oracle_score(swapped, x, u) == doctest::Approx(-oracle_score(spec, x, u)).epsilon(1e-10));
  }
  // the quadratic rule penalizes the larger covariance
  const SimulationModelSpec m6 = model_spec(6, 25);
  CHECK(oracle_score(m6, m6.mean(1, 0.5), 0.5) > 0.0);
  CHECK(oracle_score(m6, m6.mean(2, 0.5), 0.5) < 0.0);
}

TEST_CASE("oracle error on model 1 matches the Bayes error") {
  // delta^T Sigma^{-1} delta for AR(0.5) with 20 unit differences is 5.75 / 0.75.
  const SimulationModelSpec spec = model_spec(1, 100);
  const Eigen::VectorXd delta = spec.mean(1, 0.0) - spec.mean(2, 0.0);
  const double d2 = delta.dot(spec.cov(1, 0.0).ldlt().solve(delta));
  CHECK(d2 == doctest::Approx(5.75 / 0.75).epsilon(1e-10));
  const double bayes = 0.5 * std::erfc(std::sqrt(d2) / 2.0 / std::sqrt(2.0));
  const Dataset test = generate(spec, 5000, 5000, 3);
  const std::vector<int> pred = oracle_predict(spec, test.features(), test.index());
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != test.labels()[i];
  CHECK(static_cast<double>(wrong) / 10000.0 == doctest::Approx(bayes).epsilon(0.08));
}

TEST_CASE("benchmark config and reporting") {
  BenchmarkConfig c;
  c.model_id = 1;
  c.p = 20;
  c.n1 = c.n2 = 20;
  c.reps = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c.reps = 3;
  c.methods = {Method::oracle};
  const BenchmarkResult r = run_benchmark(c);
  REQUIRE(r.methods.size() == 1);
  CHECK(r.methods[0].errors.size() == 3);
  CHECK(r.methods[0].se >= 0.0);
  const std::string table = benchmark_table({r});
  CHECK(table.rfind("p,Oracle\n20,", 0) == 0);

  nlohmann::json j = c;
  const BenchmarkConfig back = j.get<BenchmarkConfig>();
  CHECK(back.methods == c.methods);
  CHECK(back.reps == 3);
  CHECK(parse_method("DSPCAQDA") == Method::dspca_qda);
  CHECK_THROWS_AS(parse_method("svm"), Error);
}

TEST_CASE("benchmark is reproducible across thread counts") {
  BenchmarkConfig c;
  c.model_id = 6;
  c.p = 25;
  c.n1 = c.n2 = 30;
  c.reps = 2;
  c.seed = 4;
  c.threads = 1;
  const BenchmarkResult a = run_benchmark(c);
  c.threads = 2;
  const BenchmarkResult b = run_benchmark(c);
  for (std::size_t m = 0; m < a.methods.size(); ++m) CHECK(a.methods[m].errors == b.methods[m].errors);
  CHECK(a.method(Method::dspca_qda).mean >= 0.0);
}
