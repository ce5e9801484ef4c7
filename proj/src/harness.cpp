#include "eki/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eki/errors.hpp"

namespace eki {

namespace {

std::string model_name(ModelKind m) { return m == ModelKind::elliptic ? "elliptic" : "darcy"; }
std::string mode_name(EnsembleMode m) {
  return m == EnsembleMode::random_draws ? "R" : "KL";
}

ModelKind model_from_name(const std::string& s) {
  if (s == "elliptic") return ModelKind::elliptic;
  if (s == "darcy") return ModelKind::darcy;
  throw ConfigError("unknown model '" + s + "' (expected elliptic or darcy)");
}

EnsembleMode mode_from_name(const std::string& s) {
  if (s == "R") return EnsembleMode::random_draws;
  if (s == "KL") return EnsembleMode::karhunen_loeve;
  throw ConfigError("unknown ensemble mode '" + s + "' (expected R or KL)");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (ensemble_size < 2) throw ConfigError("ensemble_size must be at least 2");
  if (!(tau > 1.0)) throw ConfigError("tau must exceed 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (model == ModelKind::elliptic) {
    if (!(elliptic.beta > 0.0) || !(elliptic.gamma > 0.0))
      throw ConfigError("elliptic beta and gamma must be positive");
    if (elliptic.modes < 1) throw ConfigError("elliptic modes must be positive");
  } else {
    if (!(darcy.beta > 0.0) || !(darcy.gamma > 0.0))
      throw ConfigError("darcy beta and gamma must be positive");
    if (!(darcy.alpha > 1.0)) throw ConfigError("darcy alpha must exceed 1");
    if (darcy.grid_cells < 8) throw ConfigError("darcy grid needs at least 8 cells per side");
    if (darcy.kl_modes < 2) throw ConfigError("darcy kl_modes must be at least 2");
    if (darcy.wells_per_side < 1) throw ConfigError("darcy wells_per_side must be positive");
    if (ensemble_mode == EnsembleMode::karhunen_loeve &&
        ensemble_size > darcy.kl_modes * darcy.kl_modes - 1)
      throw ConfigError("KL ensemble larger than the stored spectrum");
  }
  if (report_iteration && (*report_iteration < 0 || *report_iteration > max_iterations))
    throw ConfigError("report_iteration out of range");
}

int ExperimentConfig::effective_report_iteration() const {
  if (report_iteration) return *report_iteration;
  return ensemble_mode == EnsembleMode::random_draws ? 1 : max_iterations;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = model_name(c.model);
  j["elliptic"] = {{"beta", c.elliptic.beta},
                   {"gamma", c.elliptic.gamma},
                   {"modes", c.elliptic.modes}};
  j["darcy"] = {{"alpha", c.darcy.alpha},
                {"beta", c.darcy.beta},
                {"mean_log_conductivity", c.darcy.mean_log_conductivity},
                {"gamma", c.darcy.gamma},
                {"grid_cells", c.darcy.grid_cells},
                {"kl_modes", c.darcy.kl_modes},
                {"wells_per_side", c.darcy.wells_per_side}};
  j["ensemble_mode"] = mode_name(c.ensemble_mode);
  j["ensemble_size"] = c.ensemble_size;
  j["tau"] = c.tau;
  j["max_iterations"] = c.max_iterations;
  j["master_seed"] = c.master_seed;
  j["replications"] = c.replications;
  j["perturb_observations"] = c.perturb_observations;
  j["run_to_max"] = c.run_to_max;
  if (c.report_iteration) j["report_iteration"] = *c.report_iteration;
  j["ls"] = {{"max_lm_iterations", c.ls.max_lm_iterations},
             {"initial_damping", c.ls.initial_damping},
             {"damping_increase", c.ls.damping_increase},
             {"damping_decrease", c.ls.damping_decrease},
             {"fd_step", c.ls.fd_step}};
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.model = model_from_name(j.at("model").get<std::string>());
    if (j.contains("elliptic")) {
      const auto& e = j.at("elliptic");
      if (e.contains("beta")) c.elliptic.beta = e.at("beta").get<double>();
      if (e.contains("gamma")) c.elliptic.gamma = e.at("gamma").get<double>();
      if (e.contains("modes")) c.elliptic.modes = e.at("modes").get<int>();
    }
    if (j.contains("darcy")) {
      const auto& d = j.at("darcy");
      if (d.contains("alpha")) c.darcy.alpha = d.at("alpha").get<double>();
      if (d.contains("beta")) c.darcy.beta = d.at("beta").get<double>();
      if (d.contains("mean_log_conductivity"))
        c.darcy.mean_log_conductivity = d.at("mean_log_conductivity").get<double>();
      if (d.contains("gamma")) c.darcy.gamma = d.at("gamma").get<double>();
      if (d.contains("grid_cells")) c.darcy.grid_cells = d.at("grid_cells").get<int>();
      if (d.contains("kl_modes")) c.darcy.kl_modes = d.at("kl_modes").get<int>();
      if (d.contains("wells_per_side"))
        c.darcy.wells_per_side = d.at("wells_per_side").get<int>();
    }
    if (j.contains("ensemble_mode"))
      c.ensemble_mode = mode_from_name(j.at("ensemble_mode").get<std::string>());
    if (j.contains("ensemble_size")) c.ensemble_size = j.at("ensemble_size").get<int>();
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("max_iterations")) c.max_iterations = j.at("max_iterations").get<int>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("replications")) c.replications = j.at("replications").get<int>();
    if (j.contains("perturb_observations"))
      c.perturb_observations = j.at("perturb_observations").get<bool>();
    if (j.contains("run_to_max")) c.run_to_max = j.at("run_to_max").get<bool>();
    if (j.contains("report_iteration") && !j.at("report_iteration").is_null())
      c.report_iteration = j.at("report_iteration").get<int>();
    if (j.contains("ls")) {
      const auto& l = j.at("ls");
      if (l.contains("max_lm_iterations"))
        c.ls.max_lm_iterations = l.at("max_lm_iterations").get<int>();
      if (l.contains("initial_damping"))
        c.ls.initial_damping = l.at("initial_damping").get<double>();
      if (l.contains("damping_increase"))
        c.ls.damping_increase = l.at("damping_increase").get<double>();
      if (l.contains("damping_decrease"))
        c.ls.damping_decrease = l.at("damping_decrease").get<double>();
      if (l.contains("fd_step")) c.ls.fd_step = l.at("fd_step").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

Problem build_problem(const ExperimentConfig& config) {
  config.validate();
  if (config.model == ModelKind::elliptic) {
    return Problem{make_elliptic_model(config.elliptic.modes),
                   covariance_elliptic(config.elliptic.beta, config.elliptic.modes)};
  }
  auto model = std::make_unique<DarcyModel>(
      DarcyGrid(config.darcy.grid_cells), config.darcy.kl_modes,
      config.darcy.mean_log_conductivity, well_lattice(config.darcy.wells_per_side));
  return Problem{std::move(model),
                 covariance_darcy(config.darcy.beta, config.darcy.alpha,
                                  config.darcy.kl_modes)};
}

TruthData make_truth(const ExperimentConfig& config, const Problem& problem,
                     const RandomStream& stream) {
  TruthData out{
      sample_prior(problem.prior, stream.with_purpose(stream_purpose::kTruth)),
      {},
      {},
      0.0,
      0.0};
  out.data = problem.model->evaluate(out.truth);
  const std::size_t kappa = out.data.size();
  const double gamma = config.noise_gamma();
  out.noise.assign(kappa, 0.0);
  if (gamma > 0.0) {
    out.noise = gaussian_draws(stream.with_purpose(stream_purpose::kTruthNoise), kappa);
    for (double& v : out.noise) v *= gamma;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < kappa; ++i) {
    out.data[i] += out.noise[i];
    s += out.noise[i] * out.noise[i];
  }
  out.noise_norm = std::sqrt(s);
  out.noise_norm_weighted = gamma > 0.0 ? out.noise_norm / gamma : 0.0;
  return out;
}

namespace {

nlohmann::ordered_json diagnostics_to_json(const Diagnostics& d) {
  nlohmann::ordered_json j;
  j["iteration"] = d.iteration;
  if (d.relative_error)
    j["relative_error"] = *d.relative_error;
  else
    j["relative_error"] = nullptr;
  j["misfit"] = d.misfit;
  j["member_misfits"] = d.member_misfits;
  return j;
}

Diagnostics diagnostics_from_json(const nlohmann::json& j) {
  Diagnostics d;
  d.iteration = j.at("iteration").get<int>();
  if (!j.at("relative_error").is_null())
    d.relative_error = j.at("relative_error").get<double>();
  d.misfit = j.at("misfit").get<double>();
  d.member_misfits = j.at("member_misfits").get<std::vector<double>>();
  return d;
}

}  // namespace

nlohmann::ordered_json field_to_json(const Field& field) {
  nlohmann::ordered_json j;
  switch (field.basis().kind()) {
    case BasisKind::sine_1d:
      j["basis"] = {{"kind", "sine-1d"}, {"truncation", field.basis().truncation()}};
      break;
    case BasisKind::cosine_tensor_2d:
      j["basis"] = {{"kind", "cosine-tensor-2d"}, {"truncation", field.basis().truncation()}};
      break;
    case BasisKind::nodal_grid_2d:
      j["basis"] = {{"kind", "nodal-grid-2d"}, {"truncation", field.basis().truncation()}};
      break;
  }
  j["coeffs"] = std::vector<double>(field.coeffs().begin(), field.coeffs().end());
  return j;
}

Field field_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("basis").at("kind").get<std::string>();
  const int truncation = j.at("basis").at("truncation").get<int>();
  Basis basis = kind == "sine-1d"            ? Basis::sine(truncation)
                : kind == "cosine-tensor-2d" ? Basis::cosine_tensor(truncation)
                : kind == "nodal-grid-2d"    ? Basis::nodal(truncation)
                                             : throw ConfigError("unknown basis kind " + kind);
  return Field(basis, j.at("coeffs").get<std::vector<double>>());
}

nlohmann::ordered_json RunRecord::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "eki-run-record-v1";
  j["replication"] = replication;
  j["master_seed"] = config.master_seed;
  j["derived_seed"] = derived_seed;
  j["config"] = config_to_json(config);
  j["truth"] = {{"norm", truth_norm},
                {"noise_norm", noise_norm},
                {"noise_norm_weighted", noise_norm_weighted}};
  nlohmann::ordered_json diag = nlohmann::ordered_json::array();
  for (const auto& d : diagnostics) diag.push_back(diagnostics_to_json(d));
  j["diagnostics"] = diag;
  j["stopped_iteration"] = stopped_iteration;
  j["converged"] = converged;
  j["report_iteration"] = report_iteration;
  j["errors"] = {{"enkf_at_stop", enkf_error_at_stop},
                 {"enkf_at_report", enkf_error_at_report},
                 {"ls", ls_error},
                 {"ba", ba_error}};
  j["ls"] = {{"misfit", ls_misfit}, {"iterations", ls_iterations}};
  j["failed"] = failed;
  if (failed) j["failure"] = failure;
  return j;
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
  RunRecord r;
  r.config = config_from_json(j.at("config"));
  r.replication = j.at("replication").get<int>();
  r.derived_seed = j.at("derived_seed").get<std::uint64_t>();
  r.truth_norm = j.at("truth").at("norm").get<double>();
  r.noise_norm = j.at("truth").at("noise_norm").get<double>();
  r.noise_norm_weighted = j.at("truth").at("noise_norm_weighted").get<double>();
  for (const auto& d : j.at("diagnostics")) r.diagnostics.push_back(diagnostics_from_json(d));
  r.stopped_iteration = j.at("stopped_iteration").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.report_iteration = j.at("report_iteration").get<int>();
  r.enkf_error_at_stop = j.at("errors").at("enkf_at_stop").get<double>();
  r.enkf_error_at_report = j.at("errors").at("enkf_at_report").get<double>();
  r.ls_error = j.at("errors").at("ls").get<double>();
  r.ba_error = j.at("errors").at("ba").get<double>();
  r.ls_misfit = j.at("ls").at("misfit").get<double>();
  r.ls_iterations = j.at("ls").at("iterations").get<int>();
  r.failed = j.at("failed").get<bool>();
  if (r.failed) r.failure = j.at("failure").get<std::string>();
  return r;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string error_csv(const RunRecord& record) {
  std::ostringstream os;
  os << "iteration,relative_error\n";
  for (const auto& d : record.diagnostics)
    os << d.iteration << ','
       << (d.relative_error ? format_double(*d.relative_error) : "") << '\n';
  return os.str();
}

std::string misfit_csv(const RunRecord& record) {
  std::ostringstream os;
  os << "iteration,misfit,noise_level\n";
  for (const auto& d : record.diagnostics)
    os << d.iteration << ',' << format_double(d.misfit) << ','
       << format_double(record.noise_norm_weighted) << '\n';
  return os.str();
}

std::string record_stem(int replication) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03d", replication);
  return buf;
}

RunRecord run_one_replication(const ExperimentConfig& config, const Problem& problem,
                              const TruthData& truth, int replication) {
  RunRecord record;
  record.config = config;
  record.replication = replication;
  record.derived_seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(replication));
  record.truth_norm = truth.truth.norm();
  record.noise_norm = truth.noise_norm;
  record.noise_norm_weighted = truth.noise_norm_weighted;

  const WeightedNorm gamma = WeightedNorm::white_noise(config.noise_gamma());
  const RandomStream rep_stream{record.derived_seed, stream_purpose::kGeneric, 0, 0};

  Subspace span =
      config.ensemble_mode == EnsembleMode::random_draws
          ? Subspace(problem.prior.basis(),
                     sample_prior_ensemble(problem.prior, config.ensemble_size,
                                           rep_stream.with_purpose(stream_purpose::kEnsembleInit)))
          : kl_ensemble(problem.prior, config.ensemble_size);

  StoppingRule rule{config.tau, truth.noise_norm_weighted, config.max_iterations};
  RunOptions options;
  options.perturb = config.perturb_observations;
  options.continue_to_max = config.run_to_max;

  EkiRunResult eki_result =
      run(span, *problem.model, truth.data, gamma, rule,
          rep_stream.with_purpose(stream_purpose::kPerturbation), truth.truth, options);

  record.diagnostics = eki_result.history;
  record.stopped_iteration = eki_result.stopped_iteration;
  record.converged = eki_result.converged;

  const int last_recorded = static_cast<int>(eki_result.history.size()) - 1;
  record.report_iteration = std::min(config.effective_report_iteration(), last_recorded);
  const double tn = truth.truth.norm();
  auto rel_error = [&](const Field& f) { return (f - truth.truth).norm() / tn; };
  record.enkf_error_at_stop = rel_error(eki_result.estimate_at_stop());
  record.enkf_error_at_report =
      rel_error(eki_result.estimates[static_cast<std::size_t>(record.report_iteration)]);

  LsSettings ls = config.ls;
  ls.stopping = rule;
  const LsRegularization reg = config.model == ModelKind::elliptic
                                   ? LsRegularization::tikhonov
                                   : LsRegularization::discrepancy_stop;
  LsResult ls_result =
      subspace_ls(*problem.model, span, truth.data, gamma, ls, reg, &problem.prior);
  record.ls_error = rel_error(ls_result.estimate);
  record.ls_misfit = ls_result.misfit;
  record.ls_iterations = ls_result.iterations;

  record.ba_error = rel_error(best_approximation(span, truth.truth));
  return record;
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  Problem problem = build_problem(config);
  const RandomStream truth_stream{config.master_seed, stream_purpose::kGeneric, 0, 0};
  const TruthData truth = make_truth(config, problem, truth_stream);

  std::vector<RunRecord> records(static_cast<std::size_t>(config.replications));
  std::vector<double> wall_seconds(records.size(), 0.0);

#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < config.replications; ++r) {
    const auto start = std::chrono::steady_clock::now();
    RunRecord record;
    try {
      record = run_one_replication(config, problem, truth, r);
    } catch (const std::exception& e) {
      record.config = config;
      record.replication = r;
      record.derived_seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(r));
      record.failed = true;
      record.failure = e.what();
    }
    wall_seconds[static_cast<std::size_t>(r)] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records[static_cast<std::size_t>(r)] = std::move(record);
  }

  for (int r = 0; r < config.replications; ++r) {
    const auto& record = records[static_cast<std::size_t>(r)];
    const std::string stem = record_stem(r);
    write_text(out_dir / (stem + ".json"), record.to_json().dump(2) + "\n");
    write_text(out_dir / (stem + "_error.csv"), error_csv(record));
    write_text(out_dir / (stem + "_misfit.csv"), misfit_csv(record));
    nlohmann::ordered_json timing;
    timing["wall_seconds"] = wall_seconds[static_cast<std::size_t>(r)];
    write_text(out_dir / (stem + ".time.json"), timing.dump(2) + "\n");
  }
  return records;
}

Summary summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw EmptyInput("summarize: no records");
  Summary s;
  s.ensemble_size = records.front().config.ensemble_size;
  s.mode = mode_name(records.front().config.ensemble_mode);
  for (const auto& r : records) {
    if (r.failed) continue;
    s.enkf_mean += r.enkf_error_at_report;
    s.ls_mean += r.ls_error;
    s.ba_mean += r.ba_error;
    ++s.count;
  }
  if (s.count == 0) throw EmptyInput("summarize: all records failed");
  s.enkf_mean /= s.count;
  s.ls_mean /= s.count;
  s.ba_mean /= s.count;
  return s;
}

std::string summary_to_text(const Summary& s) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "method        mean relative error   (J=%d, %d runs)\n",
                s.ensemble_size, s.count);
  os << line;
  std::snprintf(line, sizeof line, "EnKF_%-4s     %.6f\n", s.mode.c_str(), s.enkf_mean);
  os << line;
  std::snprintf(line, sizeof line, "LS_%-4s       %.6f\n", s.mode.c_str(), s.ls_mean);
  os << line;
  std::snprintf(line, sizeof line, "BA_%-4s       %.6f\n", s.mode.c_str(), s.ba_mean);
  os << line;
  return os.str();
}

std::string summary_to_csv(const Summary& s) {
  std::ostringstream os;
  os << "method,mean_relative_error,ensemble_size,runs\n";
  os << "EnKF_" << s.mode << ',' << format_double(s.enkf_mean) << ',' << s.ensemble_size
     << ',' << s.count << '\n';
  os << "LS_" << s.mode << ',' << format_double(s.ls_mean) << ',' << s.ensemble_size << ','
     << s.count << '\n';
  os << "BA_" << s.mode << ',' << format_double(s.ba_mean) << ',' << s.ensemble_size << ','
     << s.count << '\n';
  return os.str();
}

ExperimentConfig table1_config(const std::string& column) {
  ExperimentConfig c;
  if (column == "elliptic") {
    c.model = ModelKind::elliptic;
    c.ensemble_mode = EnsembleMode::random_draws;
    c.ensemble_size = 25;
    c.replications = 100;
    c.max_iterations = 1;  // the comparison reports the first iteration
    c.run_to_max = true;
    c.master_seed = 9;
  } else if (column == "groundwater") {
    c.model = ModelKind::darcy;
    c.darcy.grid_cells = 32;
    c.ensemble_mode = EnsembleMode::random_draws;
    c.ensemble_size = 25;
    c.replications = 20;
    c.max_iterations = 1;
    c.run_to_max = true;
    c.master_seed = 28;
  } else {
    throw ConfigError("table1 column must be 'elliptic' or 'groundwater'");
  }
  return c;
}

std::vector<RunRecord> load_records(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("run_", 0) == 0 && name.size() > 5 &&
        name.compare(name.size() - 5, 5, ".json") == 0 &&
        name.find(".time.") == std::string::npos)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    nlohmann::json j;
    in >> j;
    records.push_back(RunRecord::from_json(j));
  }
  return records;
}

}  // namespace eki
