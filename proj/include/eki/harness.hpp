#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eki/baselines.hpp"
#include "eki/field.hpp"
#include "eki/forward.hpp"
#include "eki/method.hpp"

namespace eki {

enum class ModelKind { elliptic, darcy };
enum class EnsembleMode { random_draws, karhunen_loeve };

struct EllipticParams {
  double beta = 10.0;
  double gamma = 0.01;
  int modes = 512;
};

struct DarcyParams {
  double alpha = 1.3;
  double beta = 0.5;
  double mean_log_conductivity = 4.0;
  double gamma = 7.0;
  int grid_cells = 40;
  int kl_modes = 32;  // cosine modes per side; prior dimension kl_modes^2 - 1
  int wells_per_side = 10;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::elliptic;
  EllipticParams elliptic;
  DarcyParams darcy;
  EnsembleMode ensemble_mode = EnsembleMode::random_draws;
  int ensemble_size = 25;
  double tau = 1.1;
  int max_iterations = 30;
  std::uint64_t master_seed = 1;
  int replications = 1;
  bool perturb_observations = true;
  /// Record the whole curve to max_iterations even after the discrepancy stop
  /// fires (the stop iteration is still reported).
  bool run_to_max = false;
  /// Iteration whose relative error the summaries report. Defaults to 1 for
  /// random ensembles and max_iterations for KL ensembles.
  std::optional<int> report_iteration;
  LsSettings ls;

  void validate() const;  // throws ConfigError
  int effective_report_iteration() const;
  double noise_gamma() const {
    return model == ModelKind::elliptic ? elliptic.gamma : darcy.gamma;
  }
};

nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Model and prior measure described by a config.
struct Problem {
  std::unique_ptr<ForwardModel> model;
  GaussianMeasure prior;
};
Problem build_problem(const ExperimentConfig& config);

struct TruthData {
  Field truth;
  std::vector<double> data;   // y = G(truth) + noise
  std::vector<double> noise;  // the realized noise
  double noise_norm = 0.0;
  double noise_norm_weighted = 0.0;  // ||noise||_Gamma
};

/// Synthetic truth drawn from the configured prior, plus noisy data.
/// Uses the stream's seed with the truth / truth-noise purposes.
TruthData make_truth(const ExperimentConfig& config, const Problem& problem,
                     const RandomStream& stream);

struct RunRecord {
  ExperimentConfig config;
  int replication = 0;
  std::uint64_t derived_seed = 0;
  double truth_norm = 0.0;
  double noise_norm = 0.0;
  double noise_norm_weighted = 0.0;
  std::vector<Diagnostics> diagnostics;
  int stopped_iteration = 0;
  bool converged = false;
  int report_iteration = 0;
  double enkf_error_at_stop = 0.0;
  double enkf_error_at_report = 0.0;
  double ls_error = 0.0;
  double ba_error = 0.0;
  double ls_misfit = 0.0;
  int ls_iterations = 0;
  bool failed = false;
  std::string failure;

  nlohmann::ordered_json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

/// Field <-> JSON as {basis descriptor, coefficient array}; round-trips exactly.
nlohmann::ordered_json field_to_json(const Field& field);
Field field_from_json(const nlohmann::json& j);

/// Runs the configured study: one synthetic truth shared by all replications,
/// one subspace per replication, EnKF / LS / BA on the same data. Writes one
/// record JSON plus error and misfit CSV curves per replication into out_dir
/// (wall times go to a separate sidecar so records stay byte-reproducible).
std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const std::filesystem::path& out_dir);

struct Summary {
  int count = 0;
  int ensemble_size = 0;
  std::string mode;
  double enkf_mean = 0.0;
  double ls_mean = 0.0;
  double ba_mean = 0.0;
};

Summary summarize(const std::vector<RunRecord>& records);  // throws EmptyInput
std::string summary_to_text(const Summary& summary);
std::string summary_to_csv(const Summary& summary);

/// Baked configurations for the two benchmark columns; `column` is
/// "elliptic" or "groundwater".
ExperimentConfig table1_config(const std::string& column);

/// Reads every run_*.json under a directory, ordered by filename.
std::vector<RunRecord> load_records(const std::filesystem::path& dir);

}  // namespace eki
