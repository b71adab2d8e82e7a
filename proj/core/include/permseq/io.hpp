#pragma once

// On-disk formats: JSONL datasets with a JSON manifest, binary checkpoints
// with a text header, prediction dumps, and report tables.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "permseq/experiments.hpp"
#include "permseq/train.hpp"

namespace permseq::io {

namespace fs = std::filesystem;

// Writes to a sibling temp file, then renames over `path`.
void atomic_write(const fs::path& path, std::string_view contents);
std::string read_file(const fs::path& path);

// Dataset directory layout: dataset.jsonl (one record per task) and
// manifest.json (seed, counts, env params, symbol table, split ids).
void write_experiment(const fs::path& dir, const experiments::ExperimentData& data, bool force);
experiments::ExperimentData read_experiment(const fs::path& dir);

// One JSON object per line: task_id, raster (nested by raster_shape), actions, length, env.
std::string dataset_jsonl(const Dataset& data, std::span<const std::size_t> raster_shape);
std::vector<TaskInstance> parse_dataset_jsonl(std::string_view text, std::string_view expected_env);

// Header lines: magic, kind, config JSON, "<name> <rank> <dims...>" per
// tensor, "end"; then every tensor's values as little-endian float64.
std::string checkpoint_bytes(const Model& model);
Model parse_checkpoint(std::string_view bytes);
void save_checkpoint(const fs::path& path, const Model& model);
Model load_checkpoint(const fs::path& path);

// Prediction dump: one line per test item with ids and symbol names.
std::string predictions_jsonl(const Dataset& test, std::span<const std::vector<int>> predictions);

struct PredictionRecord {
  int task_id = 0;
  std::vector<std::string> truth_symbols;
  std::vector<std::string> predicted_symbols;
};
std::vector<PredictionRecord> parse_predictions_jsonl(std::string_view text);

// Rows: true symbol; columns: predicted symbol plus a trailing "missing"
// column for positions the prediction does not reach. Each row sums to the
// number of times the symbol occurs in the ground truth.
std::string confusion_csv(std::span<const PredictionRecord> records);

// Mean and population std per (experiment, model, train_size).
std::string summary_csv(std::span<const experiments::MetricsRow> rows);
// Mean precision per (experiment, train_size, model).
std::string curve_csv(std::span<const experiments::MetricsRow> rows);

}  // namespace permseq::io
