#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "amort/fixedpoint.hpp"
#include "amort/learning.hpp"

namespace amort {

using json = nlohmann::json;

// Parsed experiment configuration; validation rejects unknown keys and
// reports the offending field.
struct ExperimentConfig {
  json raw;  // normalized config (defaults filled in)
  ProblemFamily family;
  std::shared_ptr<AmortModel> model;
  json model_spec;  // the model's spec block, persisted into checkpoints
  std::string model_kind;
  LossSpec loss;
  GradModeSpec grad_mode;
  OptimizerSpec optimizer;
  TrainOptions train;
  std::string output_dir = "out";
};

ProblemFamily family_from_json(const json& spec);
std::shared_ptr<AmortModel> model_from_json(const json& spec, const ProblemFamily& family);
LossSpec loss_from_json(const json& spec, int num_iterates);
GradModeSpec grad_mode_from_json(const json& spec);
OptimizerSpec optimizer_from_json(const json& spec);

ExperimentConfig parse_experiment_config(const json& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// FNV-1a over the canonical (key-sorted) serialization: stable under key
// reordering, sensitive to any value change.
std::string config_hash(const json& cfg);

// --- checkpoints -------------------------------------------------------------
struct Checkpoint {
  int format_version = 1;
  std::string model_kind;
  json spec;
  ModelParams params;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& model_kind,
                     const json& spec, const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// --- run artifacts -----------------------------------------------------------
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

struct RunRecord {
  std::string config_hash;
  json config;
  double initial_val_gap = 0.0;
  GapReport final_gap;
  std::string checkpoint_path;
  std::string metrics_path;
  double wall_ms_total = 0.0;
};
void write_run_record(const std::filesystem::path& path, const RunRecord& record);

// formats a double so that parsing the text recovers the exact bits
std::string exact_double(double v);

}  // namespace amort
