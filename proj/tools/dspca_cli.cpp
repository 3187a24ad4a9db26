// Command-line front end: tune, predict, simulate, screen.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dspca/classifier.hpp"
#include "dspca/dataset.hpp"
#include "dspca/kernel.hpp"
#include "dspca/parallel.hpp"
#include "dspca/random.hpp"
#include "dspca/simulation.hpp"
#include "dspca/tuning.hpp"

namespace fs = std::filesystem;
using namespace dspca;

namespace {

struct Common {
  std::string out_dir = ".";
  unsigned threads = default_thread_count();
};

struct SchemaFlags {
  std::string label = "y";
  std::string index = "u";
  std::vector<std::string> features;
  std::vector<std::string> ignore;

  CsvSchema schema() const { return {label, index, features, ignore}; }

  void add(CLI::App* cmd) {
    cmd->add_option("--label-column", label, "Label column name")->capture_default_str();
    cmd->add_option("--index-column", index, "Index column name")->capture_default_str();
    cmd->add_option("--features", features, "Feature columns (default: all other columns)")->delimiter(',');
    cmd->add_option("--ignore", ignore, "Columns to skip")->delimiter(',');
  }
};

struct TuneFlags {
  std::string train;
  SchemaFlags schema;
  std::vector<double> bandwidth_grid = default_bandwidth_grid();
  double bandwidth = 0.0;
  std::vector<double> rhos = default_grid().rhos;
  long k_max = 5;
  int folds = 5;
  std::uint64_t seed = 0;
  std::string variant = "lda";
  std::string strategy = "auto";
  std::string moments = "kernel";
  bool raw_index = false;
};

struct PredictFlags {
  std::string train;
  std::string test;
  std::string params;
  SchemaFlags schema;
};

struct SimulateFlags {
  int model = 1;
  std::vector<long> p{100};
  long n1 = 100;
  long n2 = 100;
  int reps = 100;
  std::vector<std::string> methods{"oracle", "dspcalda", "dspcaqda"};
  std::uint64_t seed = 0;
  std::vector<double> rhos = default_grid().rhos;
  long k_max = 5;
  std::string strategy = "auto";
  std::string dump_train;
  std::string dump_test;
};

struct ScreenFlags {
  std::string data;
  SchemaFlags schema;
  long keep = 100;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

fs::path prepare_out(const Common& c) {
  fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// ---------------------------------------------------------------- tune

void run_tune(const Common& common, const TuneFlags& f) {
  const fs::path out = prepare_out(common);
  const LoadedDataset loaded = load_csv_file(f.train, f.schema.schema());
  Dataset train = loaded.data;
  std::optional<IndexScaler> scaler;
  if (!f.raw_index) {
    auto [normalized, s] = normalize_index(train);
    train = std::move(normalized);
    scaler = s;
  }

  Hyperparameters hp;
  hp.variant = parse_variant(f.variant);
  hp.strategy = parse_strategy(f.strategy);
  hp.moments = parse_moment_source(f.moments);

  nlohmann::json bw_json;
  if (f.bandwidth > 0.0) {
    hp.bandwidths = Bandwidths::uniform(f.bandwidth);
    bw_json = {{"bandwidths", hp.bandwidths}, {"source", "fixed"}};
  } else {
    const BandwidthSelection sel = select_bandwidths(train, f.bandwidth_grid);
    hp.bandwidths = sel.bandwidths;
    bw_json = sel;
  }
  write_json(out / "bandwidths.json", bw_json);

  TuningGrid grid;
  grid.rhos = f.rhos;
  grid.k_max = f.k_max;
  grid.folds = f.folds;
  grid.seed = f.seed;
  const CvReport report = cv_select(train, hp.bandwidths, grid, hp.variant, {hp.strategy, hp.moments, common.threads});
  write_json(out / "cv_report.json", report);

  const CellChoice choice = select_cell(report.error_table);
  const Eigen::Index chosen_row = choice.rho_index;
  hp.rho = report.chosen_rho;
  hp.K = report.chosen_K;
  nlohmann::json params = hp;
  params["feature_names"] = loaded.feature_names;
  if (scaler) params["index_scaler"] = *scaler;
  write_json(out / "params.json", params);

  std::cout << "bandwidths: mean h = (" << hp.bandwidths.mean_h[0] << ", " << hp.bandwidths.mean_h[1]
            << "), cov h = (" << hp.bandwidths.cov_h[0] << ", " << hp.bandwidths.cov_h[1] << ")\n"
            << "chosen rho = " << hp.rho << ", K = " << hp.K << ", variant = " << to_string(hp.variant) << "\n"
            << "cv error = " << fmt("%.4f", report.error_table(chosen_row, report.chosen_K - 1)) << "\n"
            << "wrote " << (out / "params.json").string() << "\n";
}

// ---------------------------------------------------------------- predict

void run_predict(const Common& common, const PredictFlags& f) {
  const fs::path out = prepare_out(common);
  std::ifstream pin(f.params);
  if (!pin) throw Error(ErrorKind::io, "cannot open '" + f.params + "'");
  nlohmann::json params;
  try {
    params = nlohmann::json::parse(pin);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, "params file '" + f.params + "': " + e.what());
  }
  Hyperparameters hp;
  std::optional<IndexScaler> scaler;
  try {
    hp = params.get<Hyperparameters>();
    if (params.contains("index_scaler")) scaler = params.at("index_scaler").get<IndexScaler>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, "params file '" + f.params + "': " + e.what());
  }

  const LoadedDataset loaded = load_csv_file(f.train, f.schema.schema());
  CsvSchema qschema = f.schema.schema();
  const QueryTable queries = load_queries_file(f.test, qschema);
  if (queries.features.cols() != loaded.data.p()) {
    throw Error(ErrorKind::shape, "test file has " + std::to_string(queries.features.cols()) +
                                      " features but training file has " + std::to_string(loaded.data.p()));
  }
  if (queries.feature_names != loaded.feature_names) {
    throw Error(ErrorKind::schema, "test and training files name their features differently");
  }

  Dataset train = loaded.data;
  Eigen::VectorXd index = queries.index;
  if (scaler) {
    train = train.with_index(scaler->apply(train.index()));
    index = scaler->apply(index);
  }
  const PredictionBatch batch = predict(train, queries.features, index, hp, common.threads);

  std::string csv = "query_id,u,score,label\n";
  auto rows = nlohmann::json::array();
  char line[128];
  for (Eigen::Index q = 0; q < queries.size(); ++q) {
    const auto& pr = batch.predictions[static_cast<std::size_t>(q)];
    if (pr) {
      std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%d\n", static_cast<long>(q), queries.index(q), pr->score,
                    pr->label);
      rows.push_back({{"query_id", q}, {"u", queries.index(q)}, {"score", pr->score}, {"label", pr->label}});
    } else {
      std::snprintf(line, sizeof line, "%ld,%.17g,NA,NA\n", static_cast<long>(q), queries.index(q));
      rows.push_back({{"query_id", q}, {"u", queries.index(q)}, {"score", nullptr}, {"label", nullptr}});
    }
    csv += line;
  }
  write_text(out / "predictions.csv", csv);
  auto failures = nlohmann::json::array();
  for (const auto& fl : batch.failures) {
    failures.push_back({{"query_id", fl.query}, {"kind", to_string(fl.kind)}, {"message", fl.message}});
    std::cerr << "warning: query " << fl.query << ": " << fl.message << "\n";
  }
  write_json(out / "predictions.json", {{"params", hp}, {"predictions", rows}, {"failures", failures}});

  std::cout << "predicted " << queries.size() - static_cast<Eigen::Index>(batch.failures.size()) << " of "
            << queries.size() << " queries (" << batch.distinct_indices << " distinct index values)\n";
  if (queries.labels) {
    long confusion[2][2] = {{0, 0}, {0, 0}};
    long scored = 0, wrong = 0;
    for (Eigen::Index q = 0; q < queries.size(); ++q) {
      const auto& pr = batch.predictions[static_cast<std::size_t>(q)];
      if (!pr) continue;
      const int truth = (*queries.labels)[static_cast<std::size_t>(q)];
      ++confusion[slot(truth)][slot(pr->label)];
      ++scored;
      wrong += truth != pr->label;
    }
    std::cout << "confusion matrix (rows: true class, columns: predicted)\n"
              << "       pred 1  pred 2\n";
    for (int t = 0; t < 2; ++t) {
      std::snprintf(line, sizeof line, "true %d %7ld %7ld\n", t + 1, confusion[t][0], confusion[t][1]);
      std::cout << line;
    }
    std::cout << "misclassification rate: " << fmt("%.4f", static_cast<double>(wrong) / static_cast<double>(scored))
              << "\n";
  }
}

// ---------------------------------------------------------------- simulate

void run_simulate(const Common& common, const SimulateFlags& f) {
  const fs::path out = prepare_out(common);
  if (!f.dump_train.empty() || !f.dump_test.empty()) {
    if (f.p.size() != 1) throw Error(ErrorKind::usage, "--dump-train/--dump-test need a single --p");
    const SimulationModelSpec spec = model_spec(f.model, f.p.front());
    if (!f.dump_train.empty()) {
      write_csv_file(f.dump_train, generate(spec, f.n1, f.n2, make_stream(f.seed, {1})()));
      std::cout << "wrote " << f.dump_train << "\n";
    }
    if (!f.dump_test.empty()) {
      write_csv_file(f.dump_test, generate(spec, f.n1, f.n2, make_stream(f.seed, {2})()));
      std::cout << "wrote " << f.dump_test << "\n";
    }
    return;
  }

  std::vector<BenchmarkResult> results;
  for (long p : f.p) {
    BenchmarkConfig c;
    c.model_id = f.model;
    c.p = p;
    c.n1 = f.n1;
    c.n2 = f.n2;
    c.reps = f.reps;
    c.methods.clear();
    for (const auto& m : f.methods) c.methods.push_back(parse_method(m));
    c.seed = f.seed;
    c.threads = common.threads;
    c.tuning.rhos = f.rhos;
    c.tuning.k_max = f.k_max;
    c.strategy = parse_strategy(f.strategy);
    c.validate();
    results.push_back(run_benchmark(c));
    for (const auto& w : results.back().warnings) std::cerr << "warning: " << w << "\n";
  }
  const std::string table = benchmark_table(results);
  write_text(out / "benchmark.csv", table);
  write_json(out / "benchmark.json", results);
  std::cout << "model " << f.model << ", " << f.reps << " replicates\n" << table;
  for (const auto& r : results)
    for (const auto& m : r.methods)
      std::cout << "p=" << r.config.p << " " << to_string(m.method) << ": " << fmt("%.3f", m.mean_seconds)
                << " s/replicate\n";
}

// ---------------------------------------------------------------- screen

void run_screen(const Common& common, const ScreenFlags& f) {
  const fs::path out = prepare_out(common);
  const LoadedDataset loaded = load_csv_file(f.data, f.schema.schema());
  ScreenManifest manifest;
  manifest.seed = f.seed;
  manifest.test_fraction = f.test_fraction;
  manifest.keep = f.keep;

  Dataset train = loaded.data;
  std::optional<Dataset> test;
  if (f.test_fraction > 0.0) {
    Split split = stratified_split(loaded.data, f.test_fraction, f.seed);
    train = std::move(split.train);
    test = std::move(split.test);
    manifest.train_rows = std::move(split.train_rows);
    manifest.test_rows = std::move(split.test_rows);
  }
  const Eigen::VectorXd t = welch_t_statistics(train);
  manifest.selected = t_test_screen(train, f.keep);
  for (auto c : manifest.selected) {
    manifest.selected_names.push_back(loaded.feature_names[static_cast<std::size_t>(c)]);
    manifest.statistics.push_back(t(c));
  }
  write_csv_file((out / "train.csv").string(), train.select_features(manifest.selected), manifest.selected_names);
  if (test) {
    write_csv_file((out / "test.csv").string(), test->select_features(manifest.selected), manifest.selected_names);
  }
  write_json(out / "screen_manifest.json", manifest);
  std::cout << "kept " << manifest.selected.size() << " of " << loaded.data.p() << " features; train "
            << train.n1() << "+" << train.n2();
  if (test) std::cout << ", test " << test->n1() << "+" << test->n2();
  std::cout << "\nwrote " << (out / "train.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic supervised PCA discriminant analysis"};
  app.footer(
      "Exit codes: 0 success, 2 usage or input error, 3 data shape mismatch, 4 numerical failure.\n"
      "Each command writes <command>.config.toml to the output directory; rerun with --config <file>.");
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML file");

  Common common;
  app.add_option("--out", common.out_dir, "Output directory")->envname("DSPCA_OUTPUT_DIR")->capture_default_str();
  app.add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  TuneFlags tune;
  auto* tune_cmd = app.add_subcommand("tune", "Select bandwidths by LOOCV and (rho, K) by cross-validation");
  tune_cmd->configurable();
  tune_cmd->add_option("--train", tune.train, "Training CSV")->required();
  tune.schema.add(tune_cmd);
  tune_cmd->add_option("--bandwidth-grid", tune.bandwidth_grid, "Candidate bandwidths")->delimiter(',');
  tune_cmd->add_option("--bandwidth", tune.bandwidth, "Use one fixed bandwidth everywhere instead of LOOCV");
  tune_cmd->add_option("--rhos", tune.rhos, "Candidate rho values, ascending")->delimiter(',');
  tune_cmd->add_option("--kmax", tune.k_max, "Largest reduced dimension")->capture_default_str();
  tune_cmd->add_option("--folds", tune.folds, "Cross-validation folds")->capture_default_str();
  tune_cmd->add_option("--seed", tune.seed, "Fold assignment seed")->capture_default_str();
  tune_cmd->add_option("--variant", tune.variant, "lda or qda")->capture_default_str();
  tune_cmd->add_option("--strategy", tune.strategy, "Eigen strategy: direct, factor or auto")->capture_default_str();
  tune_cmd->add_option("--moments", tune.moments, "Reduced-space moments: kernel or projected-sample")
      ->capture_default_str();
  tune_cmd->add_flag("--raw-index", tune.raw_index, "Do not rescale the index onto [0, 1]");

  PredictFlags pred;
  auto* pred_cmd = app.add_subcommand("predict", "Classify a test file with tuned parameters");
  pred_cmd->configurable();
  pred_cmd->add_option("--train", pred.train, "Training CSV")->required();
  pred_cmd->add_option("--test", pred.test, "Test CSV (label column optional)")->required();
  pred_cmd->add_option("--params", pred.params, "params.json from tune")->required();
  pred.schema.add(pred_cmd);

  SimulateFlags sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo benchmark on a simulation model");
  sim_cmd->configurable();
  sim_cmd->add_option("--model", sim.model, "Model id 1-6")->capture_default_str();
  sim_cmd->add_option("--p", sim.p, "Dimension(s)")->delimiter(',');
  sim_cmd->add_option("--n1", sim.n1, "Class 1 size for train and test")->capture_default_str();
  sim_cmd->add_option("--n2", sim.n2, "Class 2 size for train and test")->capture_default_str();
  sim_cmd->add_option("--reps", sim.reps, "Replicates (at least 2)")->capture_default_str();
  sim_cmd->add_option("--methods", sim.methods, "Subset of oracle, dspcalda, dspcaqda")->delimiter(',');
  sim_cmd->add_option("--seed", sim.seed, "Base seed")->capture_default_str();
  sim_cmd->add_option("--rhos", sim.rhos, "Candidate rho values")->delimiter(',');
  sim_cmd->add_option("--kmax", sim.k_max, "Largest reduced dimension")->capture_default_str();
  sim_cmd->add_option("--strategy", sim.strategy, "Eigen strategy")->capture_default_str();
  sim_cmd->add_option("--dump-train", sim.dump_train, "Write one generated training set and exit");
  sim_cmd->add_option("--dump-test", sim.dump_test, "Write one generated test set and exit");

  ScreenFlags scr;
  auto* scr_cmd = app.add_subcommand("screen", "Split, then keep the top features by two-sample t statistic");
  scr_cmd->configurable();
  scr_cmd->add_option("--data", scr.data, "Input CSV")->required();
  scr.schema.add(scr_cmd);
  scr_cmd->add_option("--keep", scr.keep, "Features to keep")->capture_default_str();
  scr_cmd->add_option("--test-fraction", scr.test_fraction, "Held-out fraction per class (0 disables the split)")
      ->capture_default_str();
  scr_cmd->add_option("--seed", scr.seed, "Split seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const fs::path out = prepare_out(common);
    const CLI::App* cmd = app.get_subcommands().front();
    write_text(out / (cmd->get_name() + ".config.toml"), app.config_to_str(false, true));
    if (cmd == tune_cmd) run_tune(common, tune);
    if (cmd == pred_cmd) run_predict(common, pred);
    if (cmd == sim_cmd) run_simulate(common, sim);
    if (cmd == scr_cmd) run_screen(common, scr);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::internal);
  }
  return 0;
}
