// permseq: dataset generation, training, evaluation, planning and reports.
//
//   permseq gen-data --experiment tower_fixed --seed 0 --out data/tower_fixed
//   permseq train    --data data/tower_fixed --model sinkhorn --seed 0 --run-dir runs/a
//   permseq eval     --data data/tower_fixed --models bc,sinkhorn --seeds 0 --run-dir runs/a
//   permseq run      --experiment tower_fixed --seeds 0,1,2 --run-dir runs/a
//   permseq plan     --run-dir runs/a --splits 10
//   permseq report   --run-dir runs/a

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "permseq/experiments.hpp"
#include "permseq/io.hpp"
#include "permseq/train.hpp"

namespace fs = std::filesystem;
namespace ex = permseq::experiments;
using permseq::ModelKind;

namespace {

struct TrainFlags {
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<double> tau;
  std::optional<int> sinkhorn_iters;
  std::optional<double> noise_scale;
  bool paper_scale = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--batch", batch, "Batch size");
    cmd->add_option("--tau", tau, "Sinkhorn temperature");
    cmd->add_option("--sinkhorn-iters", sinkhorn_iters, "Sinkhorn iterations");
    cmd->add_option("--noise-scale", noise_scale, "Gumbel noise scale during training");
    cmd->add_flag("--paper-scale", paper_scale, "Use the full-scale configuration");
  }

  permseq::TrainConfig config(ex::Experiment e, ModelKind kind, std::uint64_t seed) const {
    permseq::TrainConfig c = ex::default_train_config(e, kind, paper_scale);
    c.seed = seed;
    if (epochs) c.epochs = *epochs;
    if (lr) c.learning_rate = *lr;
    if (batch) c.batch_size = *batch;
    if (tau) c.sinkhorn.tau = *tau;
    if (sinkhorn_iters) c.sinkhorn.iterations = *sinkhorn_iters;
    if (noise_scale) c.sinkhorn.noise_scale = *noise_scale;
    c.validate();
    return c;
  }
};

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
  std::vector<ModelKind> kinds;
  for (const auto& n : names) kinds.push_back(permseq::parse_model_kind(n));
  if (kinds.empty()) kinds.assign(permseq::kAllModelKinds.begin(), permseq::kAllModelKinds.end());
  return kinds;
}

fs::path checkpoint_path(const fs::path& run_dir, const std::string& tag, ModelKind kind, std::uint64_t seed) {
  return run_dir / "checkpoints" /
         (tag + "_" + permseq::model_kind_name(ex::training_kind(kind)) + "_seed" + std::to_string(seed) + ".ckpt");
}

void write_history(const fs::path& run_dir, const std::string& tag, ModelKind kind, std::uint64_t seed,
                   const std::vector<double>& history) {
  std::string csv = "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, history[i]);
    csv += buf;
  }
  permseq::io::atomic_write(run_dir / "history" /
                                (tag + "_" + permseq::model_kind_name(kind) + "_seed" + std::to_string(seed) + ".csv"),
                            csv);
}

void write_eval_outputs(const fs::path& run_dir, const ex::ExperimentData& data, std::uint64_t seed,
                        const std::vector<ex::MetricsRow>& rows,
                        const std::map<ModelKind, std::vector<std::vector<int>>>& predictions) {
  const std::string tag = ex::run_tag(data);
  permseq::io::atomic_write(run_dir / "metrics" / (tag + "_seed" + std::to_string(seed) + ".csv"), ex::metrics_csv(rows));
  const permseq::Dataset test = data.test();
  for (const auto& [kind, preds] : predictions) {
    permseq::io::atomic_write(
        run_dir / "predictions" / (tag + "_" + permseq::model_kind_name(kind) + "_seed" + std::to_string(seed) + ".jsonl"),
        permseq::io::predictions_jsonl(test, preds));
  }
}

std::vector<std::uint64_t> seeds_or_default(const std::vector<std::uint64_t>& seeds, std::size_t count) {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = i;
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results are written
// into per-index slots by the callee so ordering never depends on timing.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += jobs) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action sequencing with latent permutations"};
  app.require_subcommand(1);

  // gen-data
  std::string experiment_name = "tower_fixed";
  std::uint64_t seed = 0;
  fs::path out_dir;
  ex::DataParams data_params;
  bool force = false;
  auto* gen = app.add_subcommand("gen-data", "Generate a dataset directory (dataset.jsonl + manifest.json)");
  gen->add_option("--experiment", experiment_name, "tower_fixed|tower_unique|tower_subsets|soma|scrabble")->required();
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--train-size", data_params.train_size, "Training demos (0 = default)");
  gen->add_option("--test-size", data_params.test_size, "Test demos (0 = default)");
  gen->add_option("--tile-subset", data_params.tile_subset, "Scrabble tiles drawn from the 98-tile set");
  gen->add_flag("--paper-scale", data_params.paper_scale, "Full-scale dataset sizes");
  gen->add_flag("--force", force, "Overwrite an existing dataset");

  // train
  fs::path data_dir, run_dir;
  std::string model_name = "sinkhorn";
  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train one model on a generated dataset");
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  train_cmd->add_option("--model", model_name, "bc|bc_hungarian|tcn|tcn_hungarian|sinkhorn");
  train_cmd->add_option("--seed", seed, "Training seed");
  train_cmd->add_option("--run-dir", run_dir, "Run directory for checkpoints")->required();
  train_flags.attach(train_cmd);

  // eval
  std::vector<std::string> model_names;
  std::vector<std::uint64_t> seeds;
  bool timing = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints on the test split");
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  eval_cmd->add_option("--models", model_names, "Model kinds (default: all five)")->delimiter(',');
  eval_cmd->add_option("--seeds", seeds, "Training seeds to evaluate")->delimiter(',');
  eval_cmd->add_option("--run-dir", run_dir, "Run directory holding checkpoints/")->required();

  // run
  std::size_t seed_count = 5;
  std::size_t jobs = 1;
  auto* run_cmd = app.add_subcommand("run", "Generate, train and evaluate in one go, one dataset per seed");
  run_cmd->add_option("--experiment", experiment_name, "Experiment name")->required();
  run_cmd->add_option("--models", model_names, "Model kinds (default: all five)")->delimiter(',');
  run_cmd->add_option("--seeds", seeds, "Seeds (default: 0..N-1)")->delimiter(',');
  run_cmd->add_option("--num-seeds", seed_count, "N when --seeds is absent (20 with --paper-scale)");
  run_cmd->add_option("--train-size", data_params.train_size, "Training demos (0 = default)");
  run_cmd->add_option("--test-size", data_params.test_size, "Test demos (0 = default)");
  run_cmd->add_option("--tile-subset", data_params.tile_subset, "Scrabble tiles drawn from the 98-tile set");
  run_cmd->add_option("--run-dir", run_dir, "Run directory")->required();
  run_cmd->add_option("--jobs", jobs, "Seeds trained in parallel");
  run_cmd->add_flag("--timing", timing, "Record wall-clock training time (breaks byte determinism)");
  train_flags.attach(run_cmd);

  // plan
  std::size_t splits = 10;
  std::size_t cap = permseq::planner::kDefaultIterationCap;
  bool no_tcn = false;
  bool plan_paper = false;
  auto* plan_cmd = app.add_subcommand("plan", "Warm-start planner comparison on Soma test splits");
  plan_cmd->add_option("--run-dir", run_dir, "Run directory holding soma checkpoints")->required();
  plan_cmd->add_option("--seeds", seeds, "Split seeds (default: 0..splits-1)")->delimiter(',');
  plan_cmd->add_option("--splits", splits, "Number of split seeds (100 with --paper-scale)");
  plan_cmd->add_option("--cap", cap, "Planner iteration cap per puzzle");
  plan_cmd->add_flag("--no-tcn", no_tcn, "Skip the tcn_hungarian initializer");
  plan_cmd->add_flag("--paper-scale", plan_paper, "100 splits");

  // report
  auto* report_cmd = app.add_subcommand("report", "Aggregate metrics, confusion matrices and curves");
  report_cmd->add_option("--run-dir", run_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      data_params.seed = seed;
      const auto data = ex::build(ex::parse_experiment(experiment_name), data_params);
      permseq::io::write_experiment(out_dir, data, force);
      std::printf("wrote %zu records (%zu train, %zu test) to %s\n", data.data.items.size(), data.train_ids.size(),
                  data.test_ids.size(), out_dir.c_str());
    } else if (train_cmd->parsed()) {
      const auto data = permseq::io::read_experiment(data_dir);
      const ModelKind kind = permseq::parse_model_kind(model_name);
      const auto config = train_flags.config(data.experiment, ex::training_kind(kind), seed);
      auto result = permseq::train(config, data.train());
      const std::string tag = ex::run_tag(data);
      const fs::path ckpt = checkpoint_path(run_dir, tag, kind, seed);
      permseq::io::save_checkpoint(ckpt, result.model);
      write_history(run_dir, tag, ex::training_kind(kind), seed, result.loss_history);
      std::printf("trained %s for %zu epochs, final loss %.6f -> %s\n", permseq::model_kind_name(config.kind).c_str(),
                  config.epochs, result.loss_history.empty() ? 0.0 : result.loss_history.back(), ckpt.c_str());
    } else if (eval_cmd->parsed()) {
      const auto data = permseq::io::read_experiment(data_dir);
      const auto kinds = parse_models(model_names);
      const permseq::Dataset test = data.test();
      for (std::uint64_t s : seeds_or_default(seeds, 1)) {
        std::vector<ex::MetricsRow> rows;
        std::map<ModelKind, std::vector<std::vector<int>>> predictions;
        for (ModelKind kind : kinds) {
          const permseq::Model model = permseq::io::load_checkpoint(checkpoint_path(run_dir, ex::run_tag(data), kind, s));
          auto preds = permseq::predict(model, kind, test);
          rows.push_back({ex::experiment_label(data), permseq::model_kind_name(kind), s, data.train_ids.size(),
                          permseq::score(preds, test), 0.0});
          predictions[kind] = std::move(preds);
        }
        write_eval_outputs(run_dir, data, s, rows, predictions);
        for (const auto& r : rows) {
          std::printf("%s %s seed=%llu precision=%.4f exact=%.4f repetition=%.4f\n", r.experiment.c_str(),
                      r.model.c_str(), static_cast<unsigned long long>(r.seed), r.metrics.precision,
                      r.metrics.exact_rate, r.metrics.repetition_rate);
        }
      }
    } else if (run_cmd->parsed()) {
      const ex::Experiment e = ex::parse_experiment(experiment_name);
      const auto kinds = parse_models(model_names);
      data_params.paper_scale = train_flags.paper_scale;
      const auto run_seeds = seeds_or_default(seeds, train_flags.paper_scale && seeds.empty() ? 20 : seed_count);
      std::vector<ex::RunOutput> outputs(run_seeds.size());
      std::vector<ex::ExperimentData> datasets(run_seeds.size());
      parallel_for(run_seeds.size(), jobs, [&](std::size_t i) {
        ex::DataParams p = data_params;
        p.seed = run_seeds[i];
        datasets[i] = ex::build(e, p);
        outputs[i] = ex::train_and_evaluate(
            datasets[i], kinds, [&](ModelKind tk) { return train_flags.config(e, tk, run_seeds[i]); }, timing);
      });
      for (std::size_t i = 0; i < run_seeds.size(); ++i) {
        const std::string tag = ex::run_tag(datasets[i]);
        for (auto& [tk, model] : outputs[i].models) {
          permseq::io::save_checkpoint(checkpoint_path(run_dir, tag, tk, run_seeds[i]), model);
          write_history(run_dir, tag, tk, run_seeds[i], outputs[i].loss_history.at(tk));
        }
        write_eval_outputs(run_dir, datasets[i], run_seeds[i], outputs[i].rows, outputs[i].predictions);
        for (const auto& r : outputs[i].rows) {
          std::printf("%s %s seed=%llu precision=%.4f exact=%.4f repetition=%.4f\n", r.experiment.c_str(),
                      r.model.c_str(), static_cast<unsigned long long>(r.seed), r.metrics.precision,
                      r.metrics.exact_rate, r.metrics.repetition_rate);
        }
      }
    } else if (plan_cmd->parsed()) {
      const auto split_seeds = seeds_or_default(seeds, plan_paper && seeds.empty() ? 100 : splits);
      std::vector<std::vector<permseq::planner::InitializerStats>> per_split;
      for (std::uint64_t s : split_seeds) {
        ex::DataParams p;
        p.seed = s;
        const auto data = ex::build(ex::Experiment::kSoma, p);
        const std::string tag = ex::run_tag(data);
        std::vector<permseq::planner::Initializer> learned;
        learned.push_back(ex::model_initializer(
            "sinkhorn", permseq::io::load_checkpoint(checkpoint_path(run_dir, tag, ModelKind::kSinkhorn, s)),
            ModelKind::kSinkhorn, data));
        if (!no_tcn) {
          learned.push_back(ex::model_initializer(
              "tcn_hungarian", permseq::io::load_checkpoint(checkpoint_path(run_dir, tag, ModelKind::kTcnHungarian, s)),
              ModelKind::kTcnHungarian, data));
        }
        per_split.push_back(ex::compare_on_split(data, learned, s, cap));
      }
      const auto stats = ex::pool_stats(per_split);
      const std::string csv = permseq::planner::comparison_csv(stats);
      permseq::io::atomic_write(run_dir / "planner.csv", csv);
      std::fputs(csv.c_str(), stdout);
    } else if (report_cmd->parsed()) {
      const fs::path metrics_dir = run_dir / "metrics";
      std::vector<ex::MetricsRow> rows;
      if (fs::is_directory(metrics_dir)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(metrics_dir)) {
          if (entry.path().extension() == ".csv") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          auto part = ex::parse_metrics_csv(permseq::io::read_file(f));
          rows.insert(rows.end(), part.begin(), part.end());
        }
      }
      if (rows.empty()) throw std::runtime_error("no metrics found under " + metrics_dir.string());
      const fs::path report_dir = run_dir / "report";
      permseq::io::atomic_write(report_dir / "summary.csv", permseq::io::summary_csv(rows));
      permseq::io::atomic_write(report_dir / "curve.csv", permseq::io::curve_csv(rows));
      std::size_t confusions = 0;
      const fs::path pred_dir = run_dir / "predictions";
      if (fs::is_directory(pred_dir)) {
        for (const auto& entry : fs::directory_iterator(pred_dir)) {
          if (entry.path().extension() != ".jsonl") continue;
          const auto records = permseq::io::parse_predictions_jsonl(permseq::io::read_file(entry.path()));
          permseq::io::atomic_write(report_dir / ("confusion_" + entry.path().stem().string() + ".csv"),
                                    permseq::io::confusion_csv(records));
          ++confusions;
        }
      }
      std::printf("aggregated %zu metric rows, %zu confusion matrices -> %s\n", rows.size(), confusions,
                  report_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "permseq: %s\n", e.what());
    return 1;
  }
  return 0;
}
