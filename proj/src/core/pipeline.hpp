#pragma once

// End-to-end commands behind the CLI: prep, train, eval, baseline, analyze
// and pipeline. Every command reads its inputs from the output directory of
// the previous one, so the stages can also be run one by one.
//
// Artifacts, all inside RunConfig::out:
//   merged_cleansed.csv  merged and imputed yearly table (unscaled)
//   scale_params.json    robust scale per feature/target column
//   checkpoint.json      best-epoch model, config echo and training history
//   history.csv          epoch,train_loss,val_loss
//   eval_report.json     test metrics, residuals and the "baselines" block
//   trend_report.csv     year,value,rolling,decade
//   correlations.csv     column,r,rank

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cells.hpp"
#include "dataprep.hpp"
#include "training.hpp"

namespace roadfc {

struct RunConfig {
  std::string collisions_csv = "data/collisions.csv";
  std::string casualties_csv = "data/casualties.csv";
  std::string vehicles_csv = "data/vehicles.csv";
  std::size_t skip_collisions = 6;
  std::size_t skip_casualties = 7;
  std::size_t skip_vehicles = 4;

  std::string target = "all_road_users_killed";
  bool paper_faithful = false;  // keep the target inside the feature list
  std::size_t lookback = 5;
  double train_fraction = 0.8;
  SplitMode split = SplitMode::Chronological;

  CellVariant variant = CellVariant::Lstm;
  Activation rho = Activation::Relu;
  std::size_t layers = 2;
  std::size_t hidden = 32;
  double dropout = 0.2;
  bool sr_identity_frozen = false;

  std::size_t max_epochs = 500;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 20;
  double val_fraction = 0.2;
  double clip_norm = 5.0;

  std::size_t trend_window = 5;
  std::size_t ar_order = 2;
  std::size_t ar_diff = 1;
  bool ar_center = false;

  std::string out = "out";
  std::uint64_t seed = 42;

  nlohmann::json to_json() const;
  /// Applies every key of `doc` on top of the current values. Unknown keys
  /// and ill-typed values raise ConfigError.
  void merge_json(const nlohmann::json& doc);
  void validate() const;

  std::vector<std::string> feature_columns() const;
  TrainConfig train_config() const;
  ModelArch model_arch(std::size_t input_size) const;
  std::filesystem::path out_path(std::string_view file) const;
};

/// The feature list of the original study, which includes the target.
extern const std::vector<std::string> kPaperFeatureColumns;

RunConfig load_run_config(const std::filesystem::path& path);

using LogSink = std::function<void(std::string_view)>;
void set_log_sink(LogSink sink);

/// Child seed for a subsystem, derived from the run seed by a fixed label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

void cmd_prep(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_baseline(const RunConfig& cfg);
void cmd_analyze(const RunConfig& cfg);
void cmd_pipeline(const RunConfig& cfg);

/// Names of every artifact cmd_pipeline writes.
const std::vector<std::string>& pipeline_artifacts();

/// Windowed dataset in scaled units plus what is needed to undo the scaling.
struct PreparedData {
  SeriesTable merged;  // unscaled
  RobustScaleParams scale;
  WindowedDataset windows;
  DatasetSplit split;
};

PreparedData load_prepared(const RunConfig& cfg);

/// Baseline block ("baselines" key of eval_report.json) in original units.
nlohmann::json compute_baselines(const RunConfig& cfg, const PreparedData& data);

}  // namespace roadfc
