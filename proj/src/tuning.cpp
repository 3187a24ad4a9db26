#include "dspca/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "dspca/parallel.hpp"
#include "dspca/random.hpp"

namespace dspca {

void TuningGrid::validate() const {
  if (rhos.empty()) throw Error(ErrorKind::usage, "tuning grid: rho list is empty");
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    if (!(rhos[i] > 0.0) || !std::isfinite(rhos[i])) throw Error(ErrorKind::usage, "tuning grid: rho must be positive");
    if (i > 0 && !(rhos[i] > rhos[i - 1])) throw Error(ErrorKind::usage, "tuning grid: rhos must be ascending");
  }
  if (k_max < 1) throw Error(ErrorKind::usage, "tuning grid: k_max must be at least 1");
  if (folds < 2) throw Error(ErrorKind::usage, "tuning grid: need at least 2 folds");
}

TuningGrid default_grid() {
  TuningGrid g;
  for (int r = -1; r <= 6; ++r) g.rhos.push_back(std::exp(static_cast<double>(r)));
  return g;
}

CellChoice select_cell(const Eigen::MatrixXd& table) {
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (Eigen::Index r = 0; r < table.rows(); ++r)
    for (Eigen::Index c = 0; c < table.cols(); ++c)
      if (!std::isnan(table(r, c))) {
        any = true;
        best = std::min(best, table(r, c));
      }
  if (!any) throw Error(ErrorKind::tuning, "every (rho, K) cell is inadmissible");
  for (Eigen::Index c = 0; c < table.cols(); ++c)
    for (Eigen::Index r = 0; r < table.rows(); ++r)
      if (table(r, c) == best) return {r, c + 1};
  throw Error(ErrorKind::internal, "select_cell: minimum not found");
}

std::vector<int> stratified_folds(const Dataset& ds, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::usage, "need at least 2 folds");
  auto rng = make_stream(seed, {0x666f6c6473ULL});
  std::vector<int> fold(static_cast<std::size_t>(ds.n()), 0);
  for (int label : {kClassOne, kClassTwo}) {
    std::vector<Eigen::Index> rows = ds.class_rows(label);
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t k = 0; k < rows.size(); ++k) fold[static_cast<std::size_t>(rows[k])] = static_cast<int>(k % folds);
  }
  return fold;
}

void choose(CvReport& report) {
  const CellChoice c = select_cell(report.error_table);
  report.chosen_rho = report.rhos[static_cast<std::size_t>(c.rho_index)];
  report.chosen_K = c.k;
}

void to_json(nlohmann::json& j, const CvReport& r) {
  auto table = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.error_table.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.error_table.cols(); ++k) {
      const double v = r.error_table(i, k);
      row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    }
    table.push_back(std::move(row));
  }
  std::vector<Eigen::Index> ks;
  for (Eigen::Index k = 1; k <= r.k_max; ++k) ks.push_back(k);
  j = {{"variant", to_string(r.variant)},
       {"rhos", r.rhos},
       {"k_grid", ks},
       {"folds", r.folds},
       {"seed", r.seed},
       {"held_out", r.held_out},
       {"error_table", table},
       {"chosen_rho", r.chosen_rho},
       {"chosen_K", r.chosen_K}};
}

std::vector<CvReport> cv_select(const Dataset& train, const Bandwidths& bw, const TuningGrid& grid,
                                std::span<const Variant> variants, const CvOptions& options) {
  grid.validate();
  bw.validate();
  if (variants.empty()) throw Error(ErrorKind::usage, "cv_select: no variants requested");
  train.require_classes(grid.folds, "cv_select");

  const auto fold_of = stratified_folds(train, grid.folds, grid.seed);
  std::vector<Dataset> fold_train(static_cast<std::size_t>(grid.folds));
  struct Item {
    int fold;
    Eigen::Index row;
  };
  std::vector<Item> items;
  for (int f = 0; f < grid.folds; ++f) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < train.n(); ++i) {
      if (fold_of[static_cast<std::size_t>(i)] == f) {
        items.push_back({f, i});
      } else {
        keep.push_back(i);
      }
    }
    fold_train[static_cast<std::size_t>(f)] = train.subset(keep);
  }

  const auto n_rho = static_cast<Eigen::Index>(grid.rhos.size());
  const Eigen::Index k_max = grid.k_max;
  const std::size_t n_var = variants.size();
  // Per item and variant: 0 correct, 1 wrong, -1 failed, per (rho, K).
  using Outcome = Eigen::Matrix<signed char, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<std::vector<Outcome>> outcome(items.size(),
                                            std::vector<Outcome>(n_var, Outcome::Constant(n_rho, k_max, -1)));

  parallel_for(items.size(), options.threads, [&](std::size_t it) {
    const Item item = items[it];
    const Dataset& fit = fold_train[static_cast<std::size_t>(item.fold)];
    const double u = train.index()(item.row);
    const Eigen::VectorXd x = train.features().row(item.row).transpose();
    const int truth = train.labels()[static_cast<std::size_t>(item.row)];
    std::optional<LocalEstimate> est;
    try {
      est.emplace(fit, u, bw, options.strategy);
    } catch (const Error&) {
      return;
    }
    for (Eigen::Index r = 0; r < n_rho; ++r) {
      ProjectionBasis basis;
      try {
        basis = est->basis(grid.rhos[static_cast<std::size_t>(r)], std::min(k_max, fit.p()));
      } catch (const RankDeficiency& e) {
        if (e.usable_rank() < 1) continue;
        try {
          basis = est->basis(grid.rhos[static_cast<std::size_t>(r)], e.usable_rank());
        } catch (const Error&) {
          continue;
        }
      } catch (const Error&) {
        continue;
      }
      const ProjectedMoments pm = est->project(basis, options.moments);
      const Eigen::VectorXd z = basis.vectors.transpose() * x;
      for (Eigen::Index k = 1; k <= basis.dim(); ++k) {
        for (std::size_t v = 0; v < n_var; ++v) {
          try {
            const DiscriminantRule rule = pm.rule(k, variants[v]);
            const int label = label_from_score(score_projected(rule, z.head(k)));
            outcome[it][v](r, k - 1) = label == truth ? 0 : 1;
          } catch (const Error&) {
          }
        }
      }
    }
  });

  std::vector<CvReport> reports;
  for (std::size_t v = 0; v < n_var; ++v) {
    CvReport rep;
    rep.variant = variants[v];
    rep.rhos = grid.rhos;
    rep.k_max = k_max;
    rep.folds = grid.folds;
    rep.seed = grid.seed;
    rep.held_out = static_cast<Eigen::Index>(items.size());
    rep.error_table.resize(n_rho, k_max);
    for (Eigen::Index r = 0; r < n_rho; ++r) {
      for (Eigen::Index k = 0; k < k_max; ++k) {
        std::vector<long> wrong(static_cast<std::size_t>(grid.folds), 0);
        std::vector<long> size(static_cast<std::size_t>(grid.folds), 0);
        bool failed = false;
        for (std::size_t it = 0; it < items.size() && !failed; ++it) {
          const signed char o = outcome[it][v](r, k);
          if (o < 0) failed = true;
          wrong[static_cast<std::size_t>(items[it].fold)] += o;
          ++size[static_cast<std::size_t>(items[it].fold)];
        }
        double mean = 0.0;
        for (std::size_t f = 0; f < wrong.size(); ++f) {
          mean += static_cast<double>(wrong[f]) / static_cast<double>(size[f]);
        }
        rep.error_table(r, k) = failed ? std::numeric_limits<double>::quiet_NaN() : mean / grid.folds;
      }
    }
    choose(rep);
    reports.push_back(std::move(rep));
  }
  return reports;
}

CvReport cv_select(const Dataset& train, const Bandwidths& bw, const TuningGrid& grid, Variant variant,
                   const CvOptions& options) {
  const Variant one[] = {variant};
  return std::move(cv_select(train, bw, grid, one, options).front());
}

}  // namespace dspca
