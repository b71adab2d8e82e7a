#include "permseq/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace permseq::io {

using nlohmann::json;

void atomic_write(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json nest(std::span<const double> flat, std::span<const std::size_t> shape) {
  if (shape.size() <= 1) return json(std::vector<double>(flat.begin(), flat.end()));
  const std::size_t stride = flat.size() / shape[0];
  json out = json::array();
  for (std::size_t i = 0; i < shape[0]; ++i) out.push_back(nest(flat.subspan(i * stride, stride), shape.subspan(1)));
  return out;
}

void flatten(const json& j, std::vector<double>& out) {
  if (j.is_array()) {
    for (const json& e : j) flatten(e, out);
  } else if (j.is_number()) {
    out.push_back(j.get<double>());
  } else {
    throw std::invalid_argument("raster contains a non-numeric value");
  }
}

std::string head_name(HeadKind h) {
  switch (h) {
    case HeadKind::kPermutation: return "permutation";
    case HeadKind::kBehaviourCloning: return "bc";
    case HeadKind::kTemporal: return "temporal";
  }
  return "?";
}

HeadKind parse_head(const std::string& s) {
  for (HeadKind h : {HeadKind::kPermutation, HeadKind::kBehaviourCloning, HeadKind::kTemporal}) {
    if (head_name(h) == s) return h;
  }
  throw std::invalid_argument("unknown head '" + s + "'");
}

}  // namespace

std::string dataset_jsonl(const Dataset& data, std::span<const std::size_t> raster_shape) {
  const std::size_t expected =
      std::accumulate(raster_shape.begin(), raster_shape.end(), std::size_t{1}, std::multiplies<>());
  std::string out;
  for (const TaskInstance& t : data.items) {
    if (t.raster.size() != expected) throw std::invalid_argument("raster does not match the declared shape");
    json rec;
    rec["task_id"] = t.task_id;
    rec["raster"] = nest(t.raster, raster_shape);
    rec["actions"] = t.actions;
    rec["length"] = t.length;
    rec["env"] = data.env;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<TaskInstance> parse_dataset_jsonl(std::string_view text, std::string_view expected_env) {
  std::vector<TaskInstance> items;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      if (rec.at("env").get<std::string>() != expected_env) throw std::invalid_argument("env mismatch");
      TaskInstance t;
      t.task_id = rec.at("task_id").get<int>();
      flatten(rec.at("raster"), t.raster);
      t.actions = rec.at("actions").get<std::vector<int>>();
      t.length = rec.at("length").get<std::size_t>();
      items.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw std::invalid_argument("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

void write_experiment(const fs::path& dir, const experiments::ExperimentData& data, bool force) {
  const fs::path records = dir / "dataset.jsonl";
  const fs::path manifest_path = dir / "manifest.json";
  if (!force && (fs::exists(records) || fs::exists(manifest_path))) {
    throw std::runtime_error("output " + dir.string() + " already holds a dataset (use --force to overwrite)");
  }
  json m;
  m["format"] = "permseq-dataset v1";
  m["experiment"] = experiments::experiment_name(data.experiment);
  m["env"] = data.data.env;
  m["seed"] = data.params.seed;
  m["count"] = data.data.items.size();
  m["train_count"] = data.train_ids.size();
  m["test_count"] = data.test_ids.size();
  m["n_actions"] = data.data.n_actions;
  m["max_len"] = data.data.max_len;
  m["variable_length"] = data.data.variable_length;
  m["action_symbols"] = data.data.action_symbols;
  m["symbol_names"] = data.data.symbol_names;
  m["raster_shape"] = data.raster_shape;
  m["env_params"] = data.env_params;
  m["params"] = {{"train_size", data.params.train_size},
                 {"test_size", data.params.test_size},
                 {"tile_subset", data.params.tile_subset},
                 {"paper_scale", data.params.paper_scale}};
  m["train_ids"] = data.train_ids;
  m["test_ids"] = data.test_ids;
  atomic_write(records, dataset_jsonl(data.data, data.raster_shape));
  atomic_write(manifest_path, m.dump(2) + "\n");
}

experiments::ExperimentData read_experiment(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw std::runtime_error("no manifest.json in " + dir.string());
  const json m = json::parse(read_file(manifest_path));
  experiments::ExperimentData out;
  out.experiment = experiments::parse_experiment(m.at("experiment").get<std::string>());
  out.params.seed = m.at("seed").get<std::uint64_t>();
  const json& p = m.at("params");
  out.params.train_size = p.at("train_size").get<std::size_t>();
  out.params.test_size = p.at("test_size").get<std::size_t>();
  out.params.tile_subset = p.at("tile_subset").get<std::size_t>();
  out.params.paper_scale = p.at("paper_scale").get<bool>();
  out.data.env = m.at("env").get<std::string>();
  out.data.n_actions = m.at("n_actions").get<std::size_t>();
  out.data.max_len = m.at("max_len").get<std::size_t>();
  out.data.variable_length = m.at("variable_length").get<bool>();
  out.data.action_symbols = m.at("action_symbols").get<std::vector<int>>();
  out.data.symbol_names = m.at("symbol_names").get<std::vector<std::string>>();
  out.raster_shape = m.at("raster_shape").get<std::vector<std::size_t>>();
  out.env_params = m.at("env_params").get<std::map<std::string, std::string>>();
  out.train_ids = m.at("train_ids").get<std::vector<int>>();
  out.test_ids = m.at("test_ids").get<std::vector<int>>();
  out.data.items = parse_dataset_jsonl(read_file(dir / "dataset.jsonl"), out.data.env);
  if (out.data.items.size() != m.at("count").get<std::size_t>()) {
    throw std::runtime_error("dataset.jsonl record count disagrees with the manifest");
  }
  for (std::size_t i = 0; i < out.data.items.size(); ++i) {
    if (out.data.items[i].task_id != static_cast<int>(i)) throw std::runtime_error("dataset.jsonl task ids out of order");
  }
  out.data.validate();
  return out;
}

namespace {

constexpr std::string_view kCheckpointMagic = "permseq-checkpoint v1";

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string checkpoint_bytes(const Model& model) {
  const NetConfig& net = model.net;
  json cfg;
  cfg["kind"] = model_kind_name(model.kind);
  cfg["head"] = head_name(net.head);
  cfg["input_dim"] = net.encoder.input_dim;
  cfg["hidden_dims"] = net.encoder.hidden_dims;
  cfg["latent_dim"] = net.encoder.latent_dim;
  cfg["n_actions"] = net.n_actions;
  cfg["max_len"] = net.max_len;
  cfg["stop_head"] = net.stop_head;
  cfg["tcn_state_dim"] = net.tcn_state_dim;
  cfg["tcn_layers"] = net.tcn_layers;
  cfg["tau"] = model.sinkhorn.tau;
  cfg["sinkhorn_iters"] = model.sinkhorn.iterations;
  cfg["noise_scale"] = model.sinkhorn.noise_scale;

  std::string out(kCheckpointMagic);
  out += '\n';
  out += "kind " + model_kind_name(model.kind) + '\n';
  out += cfg.dump() + '\n';
  for (const auto& [name, t] : model.params.tensors) {
    out += name + ' ' + std::to_string(t.rank());
    for (std::size_t d : t.shape()) out += ' ' + std::to_string(d);
    out += '\n';
  }
  out += "end\n";
  for (const auto& [name, t] : model.params.tensors) {
    for (double v : t.values()) put_le(out, v);
  }
  return out;
}

Model parse_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw std::invalid_argument("checkpoint header truncated");
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  if (next_line() != kCheckpointMagic) throw std::invalid_argument("not a permseq checkpoint");
  const std::string kind_line = next_line();
  if (kind_line.rfind("kind ", 0) != 0) throw std::invalid_argument("checkpoint: missing kind line");
  const json cfg = json::parse(next_line());

  Model model;
  model.kind = parse_model_kind(kind_line.substr(5));
  NetConfig& net = model.net;
  net.head = parse_head(cfg.at("head").get<std::string>());
  if (net.head != head_for(model.kind)) throw std::invalid_argument("checkpoint: head does not match model kind");
  net.encoder.input_dim = cfg.at("input_dim").get<std::size_t>();
  net.encoder.hidden_dims = cfg.at("hidden_dims").get<std::vector<std::size_t>>();
  net.encoder.latent_dim = cfg.at("latent_dim").get<std::size_t>();
  net.n_actions = cfg.at("n_actions").get<std::size_t>();
  net.max_len = cfg.at("max_len").get<std::size_t>();
  net.stop_head = cfg.at("stop_head").get<bool>();
  net.tcn_state_dim = cfg.at("tcn_state_dim").get<std::size_t>();
  net.tcn_layers = cfg.at("tcn_layers").get<std::size_t>();
  model.sinkhorn.tau = cfg.at("tau").get<double>();
  model.sinkhorn.iterations = cfg.at("sinkhorn_iters").get<int>();
  model.sinkhorn.noise_scale = cfg.at("noise_scale").get<double>();
  net.validate();

  std::vector<std::pair<std::string, Shape>> layout;
  for (std::string line = next_line(); line != "end"; line = next_line()) {
    std::istringstream ls(line);
    std::string name;
    std::size_t rank = 0;
    if (!(ls >> name >> rank) || rank == 0) throw std::invalid_argument("checkpoint: bad tensor line '" + line + "'");
    Shape shape(rank);
    for (std::size_t& d : shape) {
      if (!(ls >> d) || d == 0) throw std::invalid_argument("checkpoint: bad shape for '" + name + "'");
    }
    layout.emplace_back(std::move(name), std::move(shape));
  }
  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  const std::size_t available = bytes.size() - pos;
  std::size_t offset = 0;
  for (auto& [name, shape] : layout) {
    const std::size_t count = element_count(shape);
    if (offset + count * 8 > available) throw std::invalid_argument("checkpoint payload truncated at '" + name + "'");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = get_le(payload + offset + i * 8);
    offset += count * 8;
    model.params.tensors.emplace(name, Tensor(shape, std::move(values)));
  }
  if (offset != available) throw std::invalid_argument("checkpoint has trailing bytes");

  // The stored tensors must be exactly what the configuration implies.
  const ModelParams expected = init_params(net, 0);
  if (expected.tensors.size() != model.params.tensors.size()) {
    throw std::invalid_argument("checkpoint tensor set does not match its configuration");
  }
  for (const auto& [name, t] : expected.tensors) {
    auto it = model.params.tensors.find(name);
    if (it == model.params.tensors.end() || it->second.shape() != t.shape()) {
      throw std::invalid_argument("checkpoint tensor '" + name + "' missing or mis-shaped");
    }
  }
  return model;
}

void save_checkpoint(const fs::path& path, const Model& model) { atomic_write(path, checkpoint_bytes(model)); }

Model load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
  try {
    return parse_checkpoint(read_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string predictions_jsonl(const Dataset& test, std::span<const std::vector<int>> predictions) {
  if (predictions.size() != test.items.size()) throw std::invalid_argument("prediction count mismatch");
  auto names = [&](const std::vector<int>& seq) {
    std::vector<std::string> out;
    for (int a : seq) {
      out.push_back(test.symbol_names.at(static_cast<std::size_t>(test.action_symbols.at(static_cast<std::size_t>(a)))));
    }
    return out;
  };
  std::string out;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    json rec;
    rec["task_id"] = test.items[i].task_id;
    rec["truth"] = test.items[i].actions;
    rec["predicted"] = predictions[i];
    rec["truth_symbols"] = names(test.items[i].actions);
    rec["predicted_symbols"] = names(predictions[i]);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<PredictionRecord> parse_predictions_jsonl(std::string_view text) {
  std::vector<PredictionRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    out.push_back({rec.at("task_id").get<int>(), rec.at("truth_symbols").get<std::vector<std::string>>(),
                   rec.at("predicted_symbols").get<std::vector<std::string>>()});
  }
  return out;
}

std::string confusion_csv(std::span<const PredictionRecord> records) {
  std::vector<std::string> symbols;
  for (const auto& r : records) {
    symbols.insert(symbols.end(), r.truth_symbols.begin(), r.truth_symbols.end());
    symbols.insert(symbols.end(), r.predicted_symbols.begin(), r.predicted_symbols.end());
  }
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  auto index = [&](const std::string& s) {
    return static_cast<std::size_t>(std::lower_bound(symbols.begin(), symbols.end(), s) - symbols.begin());
  };
  const std::size_t k = symbols.size();
  std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(k + 1, 0));
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.truth_symbols.size(); ++i) {
      const std::size_t col = i < r.predicted_symbols.size() ? index(r.predicted_symbols[i]) : k;
      ++counts[index(r.truth_symbols[i])][col];
    }
  }
  std::string out = "truth";
  for (const auto& s : symbols) out += ',' + s;
  out += ",missing\n";
  for (std::size_t r = 0; r < k; ++r) {
    out += symbols[r];
    for (std::size_t c = 0; c <= k; ++c) out += ',' + std::to_string(counts[r][c]);
    out += '\n';
  }
  return out;
}

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  const double n = static_cast<double>(xs.size());
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double spread = 0.0;
  for (double x : xs) spread += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(spread / n);
  return m;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string summary_csv(std::span<const experiments::MetricsRow> rows) {
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::map<Key, std::vector<const experiments::MetricsRow*>> groups;
  for (const auto& r : rows) groups[{r.experiment, r.model, r.train_size}].push_back(&r);
  std::string out =
      "experiment,model,train_size,seeds,precision_mean,precision_std,exact_rate_mean,exact_rate_std,"
      "repetition_rate_mean,repetition_rate_std,length_acc_mean,length_acc_std\n";
  for (const auto& [key, group] : groups) {
    std::vector<double> p, e, r, l;
    for (const auto* row : group) {
      p.push_back(row->metrics.precision);
      e.push_back(row->metrics.exact_rate);
      r.push_back(row->metrics.repetition_rate);
      l.push_back(row->metrics.length_accuracy);
    }
    out += std::get<0>(key) + ',' + std::get<1>(key) + ',' + std::to_string(std::get<2>(key)) + ',' +
           std::to_string(group.size());
    for (const auto& xs : {p, e, r, l}) {
      const Moments m = moments(xs);
      out += ',' + fixed(m.mean) + ',' + fixed(m.std);
    }
    out += '\n';
  }
  return out;
}

std::string curve_csv(std::span<const experiments::MetricsRow> rows) {
  using Key = std::tuple<std::string, std::size_t, std::string>;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.experiment, r.train_size, r.model}].push_back(r.metrics.precision);
  std::string out = "experiment,train_size,model,seeds,precision_mean,precision_std\n";
  for (const auto& [key, xs] : groups) {
    const Moments m = moments(xs);
    out += std::get<0>(key) + ',' + std::to_string(std::get<1>(key)) + ',' + std::get<2>(key) + ',' +
           std::to_string(xs.size()) + ',' + fixed(m.mean) + ',' + fixed(m.std) + '\n';
  }
  return out;
}

}  // namespace permseq::io
