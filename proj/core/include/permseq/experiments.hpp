#pragma once

// Experiment roster: dataset construction per environment, train/test
// splits, and the train-then-evaluate and warm-start planning runs shared by
// the CLI and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "permseq/dataset.hpp"
#include "permseq/planner.hpp"
#include "permseq/soma.hpp"
#include "permseq/train.hpp"

namespace permseq::experiments {

enum class Experiment { kTowerFixed, kTowerUnique, kTowerSubsets, kSoma, kScrabble };

std::string experiment_name(Experiment e);
Experiment parse_experiment(std::string_view name);

struct DataParams {
  std::uint64_t seed = 0;
  // 0 selects the experiment default.
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  // Scrabble only: tiles drawn from the 98-tile set.
  std::size_t tile_subset = 26;
  bool paper_scale = false;
};

// A full dataset plus the ids used for training and testing. Ids may
// appear in both lists (tower_unique trains and tests on all 720 towers).
struct ExperimentData {
  Experiment experiment = Experiment::kTowerFixed;
  DataParams params;
  Dataset data;
  std::vector<std::size_t> raster_shape;
  std::vector<int> train_ids;
  std::vector<int> test_ids;
  // Environment parameters recorded in the manifest.
  std::map<std::string, std::string> env_params;

  Dataset train() const;
  Dataset test() const;
};

ExperimentData build(Experiment e, const DataParams& params);

// Experiment column in metrics files; scrabble carries its tile count
// ("scrabble_t26") so curves over action-set size stay separable.
std::string experiment_label(const ExperimentData& data);
// File-name stem for checkpoints and metrics: label plus training size.
std::string run_tag(const ExperimentData& data);

// Hyperparameters used when the command line does not override them.
TrainConfig default_train_config(Experiment e, ModelKind kind, bool paper_scale);

// The 240 canonical Soma solutions, solved once per process.
const std::vector<soma::SomaSolution>& soma_solutions();

struct MetricsRow {
  std::string experiment;
  std::string model;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  Metrics metrics;
  double train_time_s = 0.0;
};

struct RunOutput {
  std::vector<MetricsRow> rows;
  // Trained networks keyed by the kind they were trained as.
  std::map<ModelKind, Model> models;
  std::map<ModelKind, std::vector<double>> loss_history;
  // Test-split predictions per evaluated kind.
  std::map<ModelKind, std::vector<std::vector<int>>> predictions;
};

// The kind a network is trained as when `kind` is requested: Hungarian
// variants share the network of their plain counterpart.
ModelKind training_kind(ModelKind kind);

// Trains one network per distinct training kind and evaluates every
// requested kind on the test split. train_time_s stays 0 unless timing is
// requested, so that metrics files are reproducible byte for byte.
RunOutput train_and_evaluate(const ExperimentData& data, std::span<const ModelKind> kinds, const TrainConfig& base,
                             bool record_timing = false);
// Same, with the configuration chosen per training kind.
using ConfigFor = std::function<TrainConfig(ModelKind training_kind)>;
RunOutput train_and_evaluate(const ExperimentData& data, std::span<const ModelKind> kinds, const ConfigFor& config_for,
                             bool record_timing = false);

struct PlanningConfig {
  std::vector<std::uint64_t> split_seeds;
  TrainConfig sinkhorn;
  TrainConfig tcn;
  bool include_tcn = true;
  std::size_t iteration_cap = planner::kDefaultIterationCap;
};

struct PlanningOutput {
  // Pooled over all splits: random, oracle, sinkhorn and (optionally) tcn_hungarian.
  std::vector<planner::InitializerStats> stats;
  std::vector<MetricsRow> rows;
};

// Soma puzzle indices of the test half for a split seed (120 of 240).
std::vector<int> soma_test_ids(std::uint64_t split_seed);

// Initial extraction orders (piece ids) predicted by a trained soma model.
planner::Initializer model_initializer(const std::string& name, const Model& model, ModelKind decode_as,
                                       const ExperimentData& data);

// Full warm-start comparison for one split given already trained models.
std::vector<planner::InitializerStats> compare_on_split(const ExperimentData& data,
                                                        std::span<const planner::Initializer> learned,
                                                        std::uint64_t split_seed, std::size_t iteration_cap);

// Pools per-split statistics into one row per initializer.
std::vector<planner::InitializerStats> pool_stats(std::span<const std::vector<planner::InitializerStats>> per_split);

PlanningOutput run_planning(const PlanningConfig& config);

// Columns: experiment,model,seed,train_size,precision,exact_rate,
// repetition_rate,length_acc,train_time_s. Doubles use shortest round-trip form.
std::string metrics_csv(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_metrics_csv(std::string_view text);

}  // namespace permseq::experiments
