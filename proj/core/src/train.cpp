#include "permseq/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "permseq/assign.hpp"
#include "permseq/random.hpp"

namespace permseq {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBc: return "bc";
    case ModelKind::kBcHungarian: return "bc_hungarian";
    case ModelKind::kTcn: return "tcn";
    case ModelKind::kTcnHungarian: return "tcn_hungarian";
    case ModelKind::kSinkhorn: return "sinkhorn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind kind : kAllModelKinds) {
    if (model_kind_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

HeadKind head_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBc:
    case ModelKind::kBcHungarian: return HeadKind::kBehaviourCloning;
    case ModelKind::kTcn:
    case ModelKind::kTcnHungarian: return HeadKind::kTemporal;
    case ModelKind::kSinkhorn: return HeadKind::kPermutation;
  }
  return HeadKind::kPermutation;
}

bool is_permutation_constrained(ModelKind kind) {
  return kind == ModelKind::kBcHungarian || kind == ModelKind::kTcnHungarian || kind == ModelKind::kSinkhorn;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(sinkhorn.tau >= kMinTemperature)) throw std::invalid_argument("sinkhorn tau must be >= 1e-3");
  if (sinkhorn.iterations < 1) throw std::invalid_argument("sinkhorn iterations must be >= 1");
  if (!(sinkhorn.noise_scale >= 0.0)) throw std::invalid_argument("noise scale must be non-negative");
}

NetConfig net_config_for(const TrainConfig& config, const Dataset& data) {
  NetConfig net;
  net.encoder.input_dim = data.raster_dim();
  net.encoder.hidden_dims = config.hidden_dims;
  net.encoder.latent_dim = config.latent_dim;
  net.head = head_for(config.kind);
  net.n_actions = data.n_actions;
  net.max_len = data.max_len;
  net.stop_head = data.variable_length && net.head != HeadKind::kTemporal;
  return net;
}

Model init_model(const TrainConfig& config, const Dataset& data) {
  Model m;
  m.kind = config.kind;
  m.net = net_config_for(config, data);
  m.sinkhorn = config.sinkhorn;
  m.params = init_params(m.net, config.seed);
  return m;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void Adam::step(ModelParams& params, const std::map<std::string, Tensor>& grads) {
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, value] : params.tensors) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& grad = git->second;
    Tensor& m = m_.try_emplace(name, value.shape()).first->second;
    Tensor& v = v_.try_emplace(name, value.shape()).first->second;
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      value[i] -= lr_ * (m[i] / correction1) / (std::sqrt(v[i] / correction2) + eps_);
    }
  }
}

namespace {

// Lifts a [n,n] logits/targets pair to a batch of one.
Var as_batch(Graph& g, Var logits) {
  const Tensor& x = g.value(logits);
  if (x.rank() == 2) return g.reshape(logits, {1, x.dim(0), x.dim(1)});
  return logits;
}

Tensor as_batch(const Tensor& t) {
  if (t.rank() != 2) return t;
  return Tensor({1, t.dim(0), t.dim(1)}, std::vector<double>(t.values().begin(), t.values().end()));
}

}  // namespace

Var bc_loss(Graph& g, Var logits, const Tensor& targets_in, std::span<const std::size_t> lengths) {
  Var x = as_batch(g, logits);
  const Tensor targets = as_batch(targets_in);
  const Tensor& v = g.value(x);
  if (v.rank() != 3 || v.shape() != targets.shape()) {
    throw std::invalid_argument("bc_loss: shape mismatch " + to_string(v.shape()) + " vs " + to_string(targets.shape()));
  }
  const std::size_t batch = v.dim(0), rows = v.dim(1), cols = v.dim(2);
  if (lengths.size() != batch) throw std::invalid_argument("bc_loss: one length per batch item required");
  Tensor weights(v.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t k = lengths[b];
    if (k == 0 || k > rows) throw std::invalid_argument("bc_loss: active length " + std::to_string(k) + " out of range");
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t at = (b * rows + i) * cols + j;
        weights[at] = -targets[at] / static_cast<double>(k * batch);
      }
    }
  }
  return g.sum(g.mul_const(g.log_softmax(x), weights));
}

Var tcn_loss(Graph& g, Var logits, std::span<const std::vector<int>> sequences) {
  const Tensor& v = g.value(logits);
  if (v.rank() != 3) throw std::invalid_argument("tcn_loss: expected [batch, steps, classes], got " + to_string(v.shape()));
  const std::size_t batch = v.dim(0), steps = v.dim(1), classes = v.dim(2);
  if (sequences.size() != batch) throw std::invalid_argument("tcn_loss: one target sequence per batch item required");
  const std::size_t stop = classes - 1;
  Tensor weights(v.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& seq = sequences[b];
    const std::size_t k = seq.size();
    if (k > steps) {
      throw std::invalid_argument("tcn_loss: sequence length " + std::to_string(k) + " exceeds " +
                                  std::to_string(steps) + " steps");
    }
    const std::size_t counted = k < steps ? k + 1 : k;
    const double w = -1.0 / static_cast<double>(counted * batch);
    for (std::size_t t = 0; t < k; ++t) {
      if (seq[t] < 0 || static_cast<std::size_t>(seq[t]) >= stop) throw std::invalid_argument("tcn_loss: action out of range");
      weights[(b * steps + t) * classes + static_cast<std::size_t>(seq[t])] = w;
    }
    if (k < steps) weights[(b * steps + k) * classes + stop] = w;
  }
  return g.sum(g.mul_const(g.log_softmax(logits), weights));
}

Var stop_loss(Graph& g, Var logits, std::span<const std::size_t> lengths) {
  const Tensor& v = g.value(logits);
  if (v.rank() != 2) throw std::invalid_argument("stop_loss: expected [batch, max_len], got " + to_string(v.shape()));
  const std::size_t batch = v.dim(0), classes = v.dim(1);
  if (lengths.size() != batch) throw std::invalid_argument("stop_loss: one length per batch item required");
  Tensor weights(v.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    if (lengths[b] < 1 || lengths[b] > classes) {
      throw std::invalid_argument("stop_loss: length " + std::to_string(lengths[b]) + " outside [1, " +
                                  std::to_string(classes) + "]");
    }
    weights[b * classes + lengths[b] - 1] = -1.0 / static_cast<double>(batch);
  }
  return g.sum(g.mul_const(g.log_softmax(logits), weights));
}

namespace {

Tensor stack_rasters(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t dim = data.raster_dim();
  Tensor out({indices.size(), dim});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& raster = data.items[indices[r]].raster;
    std::copy(raster.begin(), raster.end(), out.data() + r * dim);
  }
  return out;
}

Tensor stack_targets(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t n = data.n_actions;
  Tensor out({indices.size(), n, n});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& actions = data.items[indices[b]].actions;
    for (std::size_t i = 0; i < actions.size(); ++i) out[(b * n + i) * n + static_cast<std::size_t>(actions[i])] = 1.0;
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data) {
  config.validate();
  if (data.items.empty()) throw std::invalid_argument("train: empty dataset");
  TrainResult result;
  result.model = init_model(config, data);
  Model& model = result.model;
  const NetConfig& net = model.net;
  Adam adam(config.learning_rate, config.beta1, config.beta2, config.adam_epsilon);
  Rng order_rng(mix_seed(config.seed, 101));
  Rng noise_rng(mix_seed(config.seed, 202));

  const std::size_t count = data.items.size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), order_rng);
    double total = 0.0;
    // Overflow inside the graph surfaces as domain_error from the checked ops.
    try {
      for (std::size_t start = 0; start < count; start += config.batch_size) {
        const std::size_t stop = std::min(count, start + config.batch_size);
        const std::span<const std::size_t> batch(order.data() + start, stop - start);
        std::vector<std::size_t> lengths;
        for (std::size_t i : batch) lengths.push_back(data.items[i].length);

        Graph g;
        BoundParams p(g, model.params, true);
        Var latent = encode(g, p, net.encoder, g.input(stack_rasters(data, batch)));
        Var loss;
        switch (net.head) {
          case HeadKind::kPermutation: {
            Var logits = perm_head(g, p, latent, net.n_actions);
            if (model.sinkhorn.noise_scale > 0.0) {
              Tensor noise(g.value(logits).shape());
              for (double& v : noise.values()) v = model.sinkhorn.noise_scale * sample_gumbel(noise_rng);
              logits = g.add(logits, g.input(std::move(noise)));
            }
            Var perm = sinkhorn(g, logits, model.sinkhorn.tau, model.sinkhorn.iterations);
            loss = masked_perm_loss(g, perm, stack_targets(data, batch), lengths);
            break;
          }
          case HeadKind::kBehaviourCloning:
            loss = bc_loss(g, bc_head(g, p, latent, net.n_actions), stack_targets(data, batch), lengths);
            break;
          case HeadKind::kTemporal: {
            std::vector<std::vector<int>> sequences;
            for (std::size_t i : batch) sequences.push_back(data.items[i].actions);
            loss = tcn_loss(g, tcn_decode(g, p, net, latent), sequences);
            break;
          }
        }
        if (net.stop_head) loss = g.add(loss, stop_loss(g, stop_head(g, p, latent, net.max_len), lengths));

        const double value = g.value(loss).item();
        if (!std::isfinite(value)) throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
        g.backward(loss);
        std::map<std::string, Tensor> grads;
        for (const auto& [name, var] : p.vars()) grads.emplace(name, g.grad(var));
        adam.step(model.params, grads);
        total += value * static_cast<double>(batch.size());
      }
    } catch (const std::domain_error& e) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    result.loss_history.push_back(total / static_cast<double>(count));
  }
  if (!model.params.all_finite()) throw std::runtime_error("training produced non-finite parameters");
  return result;
}

namespace {

// Hungarian over the first `length` rows of a score block, padded with zero
// rows to a square problem; returns the columns chosen for those rows.
std::vector<int> assign_rows(const std::vector<std::vector<double>>& scores, std::size_t length, std::size_t n) {
  if (length == 0) return {};
  std::vector<double> costs(n * n, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t j = 0; j < n; ++j) costs[i * n + j] = -scores[i][j];
  }
  const Assignment a = hungarian(CostMatrix(n, std::move(costs)));
  return std::vector<int>(a.perm.begin(), a.perm.begin() + static_cast<std::ptrdiff_t>(length));
}

std::vector<double> row_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) total += (v = std::exp(v - peak));
  for (double& v : out) v /= total;
  return out;
}

}  // namespace

std::vector<std::vector<int>> predict(const Model& model, ModelKind decode_as, const Dataset& data) {
  const NetConfig& net = model.net;
  if (head_for(decode_as) != net.head) {
    throw std::invalid_argument("model trained as '" + model_kind_name(model.kind) + "' cannot be decoded as '" +
                                model_kind_name(decode_as) + "'");
  }
  if (data.n_actions != net.n_actions || data.max_len != net.max_len || data.raster_dim() != net.encoder.input_dim) {
    throw std::invalid_argument("model does not match the dataset's action space or raster size");
  }
  const std::size_t n = net.n_actions;
  constexpr std::size_t kChunk = 64;
  std::vector<std::vector<int>> out;
  out.reserve(data.items.size());
  for (std::size_t start = 0; start < data.items.size(); start += kChunk) {
    std::vector<std::size_t> batch;
    for (std::size_t i = start; i < std::min(data.items.size(), start + kChunk); ++i) batch.push_back(i);
    Graph g;
    BoundParams p(g, model.params, false);
    Var latent = encode(g, p, net.encoder, g.input(stack_rasters(data, batch)));
    Tensor stop_logits;
    if (net.stop_head) stop_logits = g.value(stop_head(g, p, latent, net.max_len));
    Tensor head;
    switch (net.head) {
      case HeadKind::kPermutation:
        head = g.value(sinkhorn(g, perm_head(g, p, latent, n), model.sinkhorn.tau, model.sinkhorn.iterations));
        break;
      case HeadKind::kBehaviourCloning:
        head = g.value(bc_head(g, p, latent, n));
        break;
      case HeadKind::kTemporal:
        head = g.value(tcn_decode(g, p, net, latent));
        break;
    }
    const std::size_t rows = head.dim(1), cols = head.dim(2);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      auto row = [&](std::size_t i) { return std::span<const double>(head.data() + (b * rows + i) * cols, cols); };
      std::size_t length = net.max_len;
      if (net.stop_head) {
        length = predicted_length(std::span<const double>(stop_logits.data() + b * net.max_len, net.max_len));
      } else if (net.head == HeadKind::kTemporal && data.variable_length) {
        // Every demonstration has at least one action, so step 0 never stops.
        for (length = 1; length < rows && argmax(row(length)) != n; ++length) {
        }
      }
      std::vector<int> seq;
      switch (decode_as) {
        case ModelKind::kSinkhorn: {
          std::vector<double> block(row(0).data(), row(0).data() + n * n);
          const PermutationMatrix perm = hard_assignment(Tensor({n, n}, std::move(block)));
          for (std::size_t i = 0; i < length; ++i) seq.push_back(static_cast<int>(perm.columns()[i]));
          break;
        }
        case ModelKind::kBc:
        case ModelKind::kTcn:
          for (std::size_t i = 0; i < length; ++i) seq.push_back(static_cast<int>(argmax(row(i).first(n))));
          break;
        case ModelKind::kBcHungarian:
        case ModelKind::kTcnHungarian: {
          std::vector<std::vector<double>> scores;
          for (std::size_t i = 0; i < length; ++i) {
            std::vector<double> probs = row_softmax(row(i));
            probs.resize(n);
            scores.push_back(std::move(probs));
          }
          seq = assign_rows(scores, length, n);
          break;
        }
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

Metrics score(std::span<const std::vector<int>> predictions, const Dataset& data) {
  if (predictions.size() != data.items.size()) throw std::invalid_argument("score: prediction count mismatch");
  Metrics m;
  m.items = data.items.size();
  if (m.items == 0) return m;
  std::size_t exact = 0, lengths = 0;
  double precision = 0.0;
  for (std::size_t i = 0; i < m.items; ++i) {
    const auto& truth = data.items[i].actions;
    const auto& pred = predictions[i];
    const double p = symbol_precision(pred, truth, data.action_symbols);
    precision += p;
    if (pred.size() == truth.size()) {
      ++lengths;
      if (p == 1.0) ++exact;
    }
  }
  const double count = static_cast<double>(m.items);
  m.precision = precision / count;
  m.exact_rate = static_cast<double>(exact) / count;
  m.length_accuracy = static_cast<double>(lengths) / count;
  m.repetition_rate = repetition_stats(predictions);
  return m;
}

Metrics evaluate(const Model& model, ModelKind decode_as, const Dataset& data) {
  return score(predict(model, decode_as, data), data);
}

}  // namespace permseq
