#include "permseq/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "permseq/random.hpp"
#include "permseq/scrabble.hpp"
#include "permseq/tower.hpp"

namespace permseq::experiments {

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kTowerFixed: return "tower_fixed";
    case Experiment::kTowerUnique: return "tower_unique";
    case Experiment::kTowerSubsets: return "tower_subsets";
    case Experiment::kSoma: return "soma";
    case Experiment::kScrabble: return "scrabble";
  }
  return "?";
}

Experiment parse_experiment(std::string_view name) {
  for (Experiment e : {Experiment::kTowerFixed, Experiment::kTowerUnique, Experiment::kTowerSubsets, Experiment::kSoma,
                       Experiment::kScrabble}) {
    if (experiment_name(e) == name) return e;
  }
  throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
}

Dataset ExperimentData::train() const {
  std::vector<std::size_t> idx(train_ids.begin(), train_ids.end());
  return data.subset(idx);
}

Dataset ExperimentData::test() const {
  std::vector<std::size_t> idx(test_ids.begin(), test_ids.end());
  return data.subset(idx);
}

const std::vector<soma::SomaSolution>& soma_solutions() {
  static const std::vector<soma::SomaSolution> solutions = soma::solve_cube();
  return solutions;
}

std::vector<int> soma_test_ids(std::uint64_t split_seed) {
  std::vector<int> ids(soma_solutions().size());
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(mix_seed(split_seed, 13));
  shuffle(std::span<int>(ids), rng);
  std::vector<int> test(ids.begin() + static_cast<std::ptrdiff_t>(ids.size() / 2), ids.end());
  std::sort(test.begin(), test.end());
  return test;
}

namespace {

std::vector<int> iota_ids(std::size_t from, std::size_t to) {
  std::vector<int> ids(to - from);
  std::iota(ids.begin(), ids.end(), static_cast<int>(from));
  return ids;
}

// Seeded split of [0, total) into sorted train and test id lists.
void split_ids(ExperimentData& out, std::size_t total, std::size_t train, std::size_t test, std::uint64_t seed) {
  if (train == 0 || train + test > total) {
    throw std::invalid_argument(experiment_name(out.experiment) + ": cannot split " + std::to_string(total) +
                                " demos into " + std::to_string(train) + " train and " + std::to_string(test) +
                                " test");
  }
  std::vector<int> ids = iota_ids(0, total);
  Rng rng(seed);
  shuffle(std::span<int>(ids), rng);
  out.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(train));
  out.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(train),
                      ids.begin() + static_cast<std::ptrdiff_t>(train + test));
  std::sort(out.train_ids.begin(), out.train_ids.end());
  std::sort(out.test_ids.begin(), out.test_ids.end());
}

std::size_t or_default(std::size_t value, std::size_t fallback) { return value == 0 ? fallback : value; }

}  // namespace

ExperimentData build(Experiment e, const DataParams& params) {
  ExperimentData out;
  out.experiment = e;
  out.params = params;
  const std::uint64_t seed = params.seed;
  switch (e) {
    case Experiment::kTowerFixed: {
      const std::size_t train = or_default(params.train_size, 200);
      const std::size_t test = or_default(params.test_size, 100);
      const std::size_t lengths[] = {6};
      const auto blocks = tower::BlockSet::standard();
      out.data = tower::to_dataset("tower_fixed", blocks, tower::sample_demos(blocks, train + test, lengths, mix_seed(seed, 11)),
                                   false);
      out.train_ids = iota_ids(0, train);
      out.test_ids = iota_ids(train, train + test);
      out.raster_shape = {6, 3};
      out.env_params = {{"blocks", "BBYYRR"}, {"lengths", "6"}};
      break;
    }
    case Experiment::kTowerUnique: {
      const std::size_t lengths[] = {6};
      const auto blocks = tower::BlockSet::unique();
      out.data = tower::to_dataset("tower_unique", blocks, tower::enumerate_towers(blocks, lengths), false);
      if (params.train_size == 0) {
        out.train_ids = iota_ids(0, out.data.items.size());
        out.test_ids = out.train_ids;
      } else {
        split_ids(out, out.data.items.size(), params.train_size,
                  or_default(params.test_size, out.data.items.size() - params.train_size), mix_seed(seed, 12));
      }
      out.raster_shape = {6, 3};
      out.env_params = {{"blocks", "unique"}, {"lengths", "6"}};
      break;
    }
    case Experiment::kTowerSubsets: {
      const std::size_t lengths[] = {2, 3, 4, 5, 6};
      const auto blocks = tower::BlockSet::standard();
      out.data = tower::to_dataset("tower_subsets", blocks, tower::enumerate_towers(blocks, lengths), true);
      const std::size_t train = or_default(params.train_size, 1000);
      split_ids(out, out.data.items.size(), train, or_default(params.test_size, out.data.items.size() - train),
                mix_seed(seed, 12));
      out.raster_shape = {6, 3};
      out.env_params = {{"blocks", "BBYYRR"}, {"lengths", "2-6"}};
      break;
    }
    case Experiment::kSoma: {
      out.data = soma::to_dataset(soma_solutions());
      out.test_ids = soma_test_ids(seed);
      for (int i = 0; i < static_cast<int>(out.data.items.size()); ++i) {
        if (!std::binary_search(out.test_ids.begin(), out.test_ids.end(), i)) out.train_ids.push_back(i);
      }
      out.raster_shape = {4, 3, 3, 3};
      out.env_params = {{"views", "+x,-x,+y,-y"}, {"solutions", std::to_string(out.data.items.size())}};
      break;
    }
    case Experiment::kScrabble: {
      const std::size_t train = or_default(params.train_size, params.paper_scale ? 10000 : 6000);
      const std::size_t test = or_default(params.test_size, params.paper_scale ? 5000 : 500);
      const auto tiles = scrabble::subset_tileset(params.tile_subset, mix_seed(seed, 17));
      auto words = scrabble::sample_words(tiles, train, test, mix_seed(seed, 19));
      std::vector<scrabble::WordTask> all = std::move(words.train);
      all.insert(all.end(), words.test.begin(), words.test.end());
      out.data = scrabble::to_dataset(tiles, all);
      out.train_ids = iota_ids(0, train);
      out.test_ids = iota_ids(train, train + test);
      out.raster_shape = {scrabble::kMaxWord, scrabble::kAlphabet};
      std::string letters;
      for (const auto& t : tiles.tiles) letters += t.letter;
      out.env_params = {{"tile_subset", std::to_string(params.tile_subset)}, {"tiles", letters}};
      break;
    }
  }
  out.env_params["seed"] = std::to_string(seed);
  out.data.validate();
  return out;
}

std::string experiment_label(const ExperimentData& data) {
  std::string label = experiment_name(data.experiment);
  if (data.experiment == Experiment::kScrabble) label += "_t" + std::to_string(data.params.tile_subset);
  return label;
}

std::string run_tag(const ExperimentData& data) {
  return experiment_label(data) + "_n" + std::to_string(data.train_ids.size());
}

TrainConfig default_train_config(Experiment e, ModelKind kind, bool paper_scale) {
  TrainConfig c;
  c.kind = kind;
  switch (e) {
    case Experiment::kTowerFixed:
    case Experiment::kTowerUnique:
    case Experiment::kTowerSubsets:
      c.batch_size = 16;
      c.epochs = paper_scale ? 2000 : 300;
      break;
    case Experiment::kSoma:
      c.batch_size = 32;
      c.epochs = paper_scale ? 2000 : 500;
      break;
    case Experiment::kScrabble:
      c.learning_rate = paper_scale ? 1e-4 : 1e-3;
      c.batch_size = paper_scale ? 64 : 32;
      c.epochs = paper_scale ? 5000 : 40;
      // Unit-scale Gumbel noise drowns the signal once n reaches the tens.
      c.sinkhorn.tau = 0.3;
      c.sinkhorn.noise_scale = 0.1;
      c.sinkhorn.iterations = 10;
      break;
  }
  return c;
}

ModelKind training_kind(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBcHungarian: return ModelKind::kBc;
    case ModelKind::kTcnHungarian: return ModelKind::kTcn;
    default: return kind;
  }
}

RunOutput train_and_evaluate(const ExperimentData& data, std::span<const ModelKind> kinds, const TrainConfig& base,
                             bool record_timing) {
  return train_and_evaluate(
      data, kinds,
      [&](ModelKind tk) {
        TrainConfig c = base;
        c.kind = tk;
        return c;
      },
      record_timing);
}

RunOutput train_and_evaluate(const ExperimentData& data, std::span<const ModelKind> kinds, const ConfigFor& config_for,
                             bool record_timing) {
  const Dataset train_set = data.train();
  const Dataset test_set = data.test();
  RunOutput out;
  std::map<ModelKind, double> seconds;
  std::uint64_t out_seed = 0;
  for (ModelKind kind : kinds) {
    const ModelKind tk = training_kind(kind);
    if (out.models.contains(tk)) continue;
    TrainConfig config = config_for(tk);
    config.kind = tk;
    const auto start = std::chrono::steady_clock::now();
    out_seed = config.seed;
    TrainResult result = train(config, train_set);
    seconds[tk] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.loss_history[tk] = std::move(result.loss_history);
    out.models.emplace(tk, std::move(result.model));
  }
  for (ModelKind kind : kinds) {
    auto preds = predict(out.models.at(training_kind(kind)), kind, test_set);
    MetricsRow row;
    row.experiment = experiment_label(data);
    row.model = model_kind_name(kind);
    row.seed = out_seed;
    row.train_size = train_set.items.size();
    row.metrics = score(preds, test_set);
    row.train_time_s = record_timing ? seconds.at(training_kind(kind)) : 0.0;
    out.rows.push_back(std::move(row));
    out.predictions[kind] = std::move(preds);
  }
  return out;
}

planner::Initializer model_initializer(const std::string& name, const Model& model, ModelKind decode_as,
                                       const ExperimentData& data) {
  planner::Initializer init;
  init.name = name;
  for (auto& seq : predict(model, decode_as, data.test())) {
    for (int& a : seq) a += 1;
    init.orders.push_back(std::move(seq));
  }
  return init;
}

std::vector<planner::InitializerStats> compare_on_split(const ExperimentData& data,
                                                        std::span<const planner::Initializer> learned,
                                                        std::uint64_t split_seed, std::size_t iteration_cap) {
  std::vector<soma::SomaSolution> puzzles;
  for (int id : data.test_ids) puzzles.push_back(soma_solutions().at(static_cast<std::size_t>(id)));
  std::vector<planner::Initializer> inits;
  inits.push_back(planner::random_initializer(puzzles, mix_seed(split_seed, 23)));
  inits.push_back(planner::oracle_initializer(puzzles));
  inits.insert(inits.end(), learned.begin(), learned.end());
  const std::uint64_t seeds[] = {mix_seed(split_seed, 29)};
  return planner::warm_start_comparison(inits, puzzles, seeds, iteration_cap);
}

std::vector<planner::InitializerStats> pool_stats(std::span<const std::vector<planner::InitializerStats>> per_split) {
  std::vector<planner::InitializerStats> pooled;
  std::vector<double> collapse_weight;
  for (const auto& split : per_split) {
    for (const auto& s : split) {
      auto it = std::find_if(pooled.begin(), pooled.end(), [&](const auto& p) { return p.name == s.name; });
      if (it == pooled.end()) {
        pooled.push_back({});
        pooled.back().name = s.name;
        collapse_weight.push_back(0.0);
        it = pooled.end() - 1;
      }
      const auto at = static_cast<std::size_t>(it - pooled.begin());
      it->iterations.insert(it->iterations.end(), s.iterations.begin(), s.iterations.end());
      it->failures += s.failures;
      collapse_weight[at] += s.initial_collapse_pct * static_cast<double>(s.runs);
    }
  }
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    auto& p = pooled[i];
    p.runs = p.iterations.size();
    if (p.runs == 0) continue;
    const double n = static_cast<double>(p.runs);
    p.mean_iterations = std::accumulate(p.iterations.begin(), p.iterations.end(), 0.0) / n;
    double spread = 0.0;
    for (std::size_t it : p.iterations) spread += (static_cast<double>(it) - p.mean_iterations) * (static_cast<double>(it) - p.mean_iterations);
    p.std_iterations = std::sqrt(spread / n);
    p.initial_collapse_pct = collapse_weight[i] / n;
  }
  return pooled;
}

PlanningOutput run_planning(const PlanningConfig& config) {
  if (config.split_seeds.empty()) throw std::invalid_argument("run_planning: no split seeds");
  PlanningOutput out;
  std::vector<std::vector<planner::InitializerStats>> per_split;
  for (std::uint64_t split : config.split_seeds) {
    DataParams params;
    params.seed = split;
    const ExperimentData data = build(Experiment::kSoma, params);
    std::vector<ModelKind> kinds{ModelKind::kSinkhorn};
    std::vector<planner::Initializer> learned;

    TrainConfig sk = config.sinkhorn;
    sk.seed = split;
    RunOutput sk_run = train_and_evaluate(data, kinds, sk);
    learned.push_back(model_initializer("sinkhorn", sk_run.models.at(ModelKind::kSinkhorn), ModelKind::kSinkhorn, data));
    out.rows.insert(out.rows.end(), sk_run.rows.begin(), sk_run.rows.end());

    if (config.include_tcn) {
      TrainConfig tc = config.tcn;
      tc.seed = split;
      const ModelKind tcn_kinds[] = {ModelKind::kTcnHungarian};
      RunOutput tc_run = train_and_evaluate(data, tcn_kinds, tc);
      learned.push_back(
          model_initializer("tcn_hungarian", tc_run.models.at(ModelKind::kTcn), ModelKind::kTcnHungarian, data));
      out.rows.insert(out.rows.end(), tc_run.rows.begin(), tc_run.rows.end());
    }
    per_split.push_back(compare_on_split(data, learned, split, config.iteration_cap));
  }
  out.stats = pool_stats(per_split);
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format value");
  return std::string(buf, end);
}

double parse_double(std::string_view s, const std::string& field) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("bad value for " + field + ": '" + std::string(s) + "'");
  return v;
}

std::uint64_t parse_uint(std::string_view s, const std::string& field) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("bad value for " + field + ": '" + std::string(s) + "'");
  return v;
}

constexpr std::string_view kMetricsHeader =
    "experiment,model,seed,train_size,precision,exact_rate,repetition_rate,length_acc,train_time_s";

}  // namespace

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const MetricsRow& r : rows) {
    out += r.experiment + ',' + r.model + ',' + std::to_string(r.seed) + ',' + std::to_string(r.train_size) + ',' +
           format_double(r.metrics.precision) + ',' + format_double(r.metrics.exact_rate) + ',' +
           format_double(r.metrics.repetition_rate) + ',' + format_double(r.metrics.length_accuracy) + ',' +
           format_double(r.train_time_s) + '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw std::invalid_argument("metrics CSV: unexpected header");
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw std::invalid_argument("metrics CSV line " + std::to_string(line_no) + ": expected 9 fields");
    MetricsRow r;
    r.experiment = f[0];
    r.model = f[1];
    r.seed = parse_uint(f[2], "seed");
    r.train_size = parse_uint(f[3], "train_size");
    r.metrics.precision = parse_double(f[4], "precision");
    r.metrics.exact_rate = parse_double(f[5], "exact_rate");
    r.metrics.repetition_rate = parse_double(f[6], "repetition_rate");
    r.metrics.length_accuracy = parse_double(f[7], "length_acc");
    r.train_time_s = parse_double(f[8], "train_time_s");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace permseq::experiments
