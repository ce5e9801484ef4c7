#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "eki/errors.hpp"
#include "eki/harness.hpp"

using namespace eki;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("eki_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ExperimentConfig small_elliptic() {
  ExperimentConfig c;
  c.model = ModelKind::elliptic;
  c.elliptic.modes = 64;
  c.ensemble_size = 8;
  c.max_iterations = 3;
  c.master_seed = 9001;
  c.replications = 2;
  return c;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  ExperimentConfig c = small_elliptic();
  c.report_iteration = 2;
  auto j = config_to_json(c);
  ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);

  ExperimentConfig bad = c;
  bad.tau = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.ensemble_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  nlohmann::json junk = {{"model", "heat"}};
  CHECK_THROWS_AS(config_from_json(junk), ConfigError);
}

TEST_CASE("field json round trip is exact") {
  Field f(Basis::sine(4), {0.1, -2.25, 1e-17, 3.0000000000000004});
  Field back = field_from_json(field_to_json(f));
  CHECK(back.basis() == f.basis());
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(back[i] == f[i]);

  GaussianMeasure darcy_prior = covariance_darcy(0.5, 1.3, 6);
  Field g = sample_prior(darcy_prior, RandomStream{5, stream_purpose::kTruth, 0, 0});
  Field gb = field_from_json(field_to_json(g));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(gb[i] == g[i]);
}

TEST_CASE("make_truth: noiseless mode and determinism") {
  ExperimentConfig c = small_elliptic();
  Problem problem = build_problem(c);
  RandomStream stream{c.master_seed, stream_purpose::kGeneric, 0, 0};

  ExperimentConfig noiseless = c;
  noiseless.elliptic.gamma = 0.0;  // test-only mode; validate() would reject it
  TruthData t0 = make_truth(noiseless, problem, stream);
  const auto clean = problem.model->evaluate(t0.truth);
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(t0.data[i] == clean[i]);
  CHECK(t0.noise_norm == 0.0);

  TruthData a = make_truth(c, problem, stream);
  TruthData b = make_truth(c, problem, stream);
  CHECK(a.data == b.data);
  for (std::size_t i = 0; i < a.truth.size(); ++i) CHECK(a.truth[i] == b.truth[i]);
}

TEST_CASE("make_truth noise matches chi-square concentration") {
  // |eta|^2 / gamma^2 is chi-square with kappa degrees of freedom:
  // within 4 * sqrt(2 kappa) of kappa
  ExperimentConfig c;
  c.model = ModelKind::elliptic;
  c.elliptic.modes = 512;
  Problem problem = build_problem(c);
  TruthData t = make_truth(c, problem, RandomStream{77, stream_purpose::kGeneric, 0, 0});
  const double kappa = 512.0;
  const double stat = t.noise_norm_weighted * t.noise_norm_weighted;
  CHECK(std::abs(stat - kappa) <= 4.0 * std::sqrt(2.0 * kappa));
}

TEST_CASE("run_experiment: shared truth, distinct subspaces, files written") {
  ExperimentConfig c = small_elliptic();
  c.replications = 3;
  auto dir = temp_dir("shared_truth");
  auto records = run_experiment(c, dir);
  REQUIRE(records.size() == 3);

  // distinct subspaces means distinct BA errors; shared truth means each
  // record reports the same truth norm
  CHECK(records[0].truth_norm == records[1].truth_norm);
  CHECK(records[1].truth_norm == records[2].truth_norm);
  CHECK(records[0].ba_error != records[1].ba_error);
  CHECK(records[1].ba_error != records[2].ba_error);
  for (int r = 0; r < 3; ++r) {
    CHECK(std::filesystem::exists(dir / ("run_00" + std::to_string(r) + ".json")));
    CHECK(std::filesystem::exists(dir / ("run_00" + std::to_string(r) + "_error.csv")));
    CHECK(std::filesystem::exists(dir / ("run_00" + std::to_string(r) + "_misfit.csv")));
    CHECK(std::filesystem::exists(dir / ("run_00" + std::to_string(r) + ".time.json")));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_experiment: BA is optimal among reported methods") {
  ExperimentConfig c = small_elliptic();
  c.ensemble_mode = EnsembleMode::karhunen_loeve;
  c.ensemble_size = 20;
  c.max_iterations = 5;
  c.replications = 1;
  auto dir = temp_dir("kl_ba");
  auto records = run_experiment(c, dir);
  REQUIRE(records.size() == 1);
  const auto& r = records[0];
  CHECK_FALSE(r.failed);
  CHECK(r.ba_error <= r.ls_error + 1e-10);
  CHECK(r.ba_error <= r.enkf_error_at_report + 1e-10);
  std::filesystem::remove_all(dir);
}

TEST_CASE("record json round trips exactly") {
  ExperimentConfig c = small_elliptic();
  auto dir = temp_dir("roundtrip");
  auto records = run_experiment(c, dir);
  const auto j = records[0].to_json();
  RunRecord back = RunRecord::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.to_json().dump(2) == j.dump(2));
  std::filesystem::remove_all(dir);
}

TEST_CASE("identical config reproduces byte-identical records") {
  ExperimentConfig c = small_elliptic();
  auto dir1 = temp_dir("repro1");
  auto dir2 = temp_dir("repro2");
  run_experiment(c, dir1);
  run_experiment(c, dir2);
  for (int r = 0; r < c.replications; ++r) {
    const std::string stem = "run_00" + std::to_string(r);
    CHECK(read_file(dir1 / (stem + ".json")) == read_file(dir2 / (stem + ".json")));
    CHECK(read_file(dir1 / (stem + "_error.csv")) == read_file(dir2 / (stem + "_error.csv")));
    CHECK(read_file(dir1 / (stem + "_misfit.csv")) == read_file(dir2 / (stem + "_misfit.csv")));
  }
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("misfit csv carries a constant noise-level column") {
  ExperimentConfig c = small_elliptic();
  c.replications = 1;
  auto dir = temp_dir("csv");
  auto records = run_experiment(c, dir);
  const std::string csv = read_file(dir / "run_000_misfit.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "iteration,misfit,noise_level");
  char expected[64];
  std::snprintf(expected, sizeof expected, "%.17g", records[0].noise_norm_weighted);
  int rows = 0;
  while (std::getline(lines, line)) {
    const auto last_comma = line.rfind(',');
    CHECK(line.substr(last_comma + 1) == expected);
    ++rows;
  }
  CHECK(rows == static_cast<int>(records[0].diagnostics.size()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_records reads back what run_experiment wrote") {
  ExperimentConfig c = small_elliptic();
  auto dir = temp_dir("load");
  auto written = run_experiment(c, dir);
  auto loaded = load_records(dir);
  REQUIRE(loaded.size() == written.size());
  for (std::size_t i = 0; i < loaded.size(); ++i)
    CHECK(loaded[i].to_json() == written[i].to_json());
  std::filesystem::remove_all(dir);
}

TEST_CASE("summarize averages per-method errors") {
  RunRecord a;
  a.config = small_elliptic();
  a.enkf_error_at_report = 0.2;
  a.ls_error = 0.3;
  a.ba_error = 0.1;
  RunRecord b = a;
  b.enkf_error_at_report = 0.4;
  b.ls_error = 0.5;
  b.ba_error = 0.3;

  Summary single = summarize({a});
  CHECK(single.enkf_mean == doctest::Approx(0.2));
  CHECK(single.ls_mean == doctest::Approx(0.3));
  CHECK(single.ba_mean == doctest::Approx(0.1));

  Summary both = summarize({a, b});
  CHECK(both.enkf_mean == doctest::Approx(0.3));
  CHECK(both.ls_mean == doctest::Approx(0.4));
  CHECK(both.ba_mean == doctest::Approx(0.2));
  CHECK(both.count == 2);

  CHECK_THROWS_AS(summarize({}), EmptyInput);

  const std::string text = summary_to_text(both);
  CHECK(text.find("EnKF_R") != std::string::npos);
  const std::string csv = summary_to_csv(both);
  CHECK(csv.rfind("method,", 0) == 0);
}

TEST_CASE("report iteration defaults by ensemble mode") {
  ExperimentConfig c = small_elliptic();
  CHECK(c.effective_report_iteration() == 1);
  c.ensemble_mode = EnsembleMode::karhunen_loeve;
  CHECK(c.effective_report_iteration() == c.max_iterations);
  c.report_iteration = 2;
  CHECK(c.effective_report_iteration() == 2);
}

TEST_CASE("table1 configs") {
  ExperimentConfig e = table1_config("elliptic");
  CHECK(e.model == ModelKind::elliptic);
  CHECK(e.ensemble_size == 25);
  CHECK(e.replications == 100);
  ExperimentConfig g = table1_config("groundwater");
  CHECK(g.model == ModelKind::darcy);
  CHECK(g.darcy.grid_cells == 32);
  CHECK(g.replications == 20);
  CHECK_THROWS_AS(table1_config("nse"), ConfigError);
}
