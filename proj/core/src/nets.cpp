#include "permseq/nets.hpp"

#include <cmath>
#include <stdexcept>

#include "permseq/random.hpp"

namespace permseq {

void NetConfig::validate() const {
  if (encoder.input_dim == 0 || encoder.latent_dim == 0) throw std::invalid_argument("encoder dims must be >= 1");
  for (std::size_t d : encoder.hidden_dims) {
    if (d == 0) throw std::invalid_argument("encoder hidden dims must be >= 1");
  }
  if (n_actions == 0) throw std::invalid_argument("n_actions must be >= 1");
  if (max_len == 0) throw std::invalid_argument("max_len must be >= 1");
  if (head == HeadKind::kTemporal && (tcn_state_dim == 0 || tcn_layers == 0)) {
    throw std::invalid_argument("TCN needs positive state_dim and layer count");
  }
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("missing parameter '" + name + "'");
  return it->second;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : tensors) {
    if (!t.all_finite()) return false;
  }
  return true;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : tensors) total += t.size();
  return total;
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor w({rows, cols});
  for (double& v : w.values()) v = uniform_in(rng, -bound, bound);
  return w;
}

void add_dense(ModelParams& p, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  p.tensors[prefix + ".w"] = glorot(in, out, rng);
  p.tensors[prefix + ".b"] = Tensor({out});
}

std::string layer_name(const char* prefix, std::size_t i) { return prefix + std::to_string(i); }

}  // namespace

ModelParams init_params(const NetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams p;
  std::size_t width = config.encoder.input_dim;
  std::size_t layer = 0;
  for (std::size_t hidden : config.encoder.hidden_dims) {
    add_dense(p, layer_name("enc.", layer++), width, hidden, rng);
    width = hidden;
  }
  add_dense(p, layer_name("enc.", layer), width, config.encoder.latent_dim, rng);
  const std::size_t latent = config.encoder.latent_dim;
  const std::size_t n = config.n_actions;
  switch (config.head) {
    case HeadKind::kPermutation:
      add_dense(p, "perm", latent, n * n, rng);
      break;
    case HeadKind::kBehaviourCloning:
      add_dense(p, "bc", latent, n * n, rng);
      break;
    case HeadKind::kTemporal: {
      const std::size_t state = config.tcn_state_dim;
      add_dense(p, "tcn.in", latent, state, rng);
      p.tensors["tcn.pos"] = glorot(config.max_len, state, rng);
      for (std::size_t l = 0; l < config.tcn_layers; ++l) {
        const std::string prefix = layer_name("tcn.conv", l);
        p.tensors[prefix + ".past"] = glorot(state, state, rng);
        p.tensors[prefix + ".now"] = glorot(state, state, rng);
        p.tensors[prefix + ".b"] = Tensor({state});
      }
      add_dense(p, "tcn.out", state, n + 1, rng);
      break;
    }
  }
  if (config.stop_head) add_dense(p, "stop", latent, config.max_len, rng);
  return p;
}

BoundParams::BoundParams(Graph& g, const ModelParams& params, bool trainable) {
  for (const auto& [name, t] : params.tensors) vars_.emplace(name, trainable ? g.parameter(t) : g.input(t));
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("missing parameter '" + name + "'");
  return it->second;
}

Var dense(Graph& g, Var x, Var weight, Var bias) { return g.add_bias(g.matmul(x, weight), bias); }

Var encode(Graph& g, const BoundParams& p, const EncoderConfig& config, Var rasters) {
  const Tensor& x = g.value(rasters);
  if (x.rank() != 2 || x.dim(1) != config.input_dim) {
    throw std::invalid_argument("encode: expected [batch, " + std::to_string(config.input_dim) + "], got " +
                                to_string(x.shape()));
  }
  Var h = rasters;
  const std::size_t layers = config.hidden_dims.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string prefix = layer_name("enc.", l);
    h = g.relu(dense(g, h, p[prefix + ".w"], p[prefix + ".b"]));
  }
  return h;
}

Var perm_head(Graph& g, const BoundParams& p, Var latent, std::size_t n) {
  const std::size_t batch = g.value(latent).dim(0);
  return g.reshape(dense(g, latent, p["perm.w"], p["perm.b"]), {batch, n, n});
}

Var bc_head(Graph& g, const BoundParams& p, Var latent, std::size_t n) {
  const std::size_t batch = g.value(latent).dim(0);
  return g.reshape(dense(g, latent, p["bc.w"], p["bc.b"]), {batch, n, n});
}

Var stop_head(Graph& g, const BoundParams& p, Var latent, std::size_t max_len) {
  Var logits = dense(g, latent, p["stop.w"], p["stop.b"]);
  if (g.value(logits).dim(1) != max_len) throw std::invalid_argument("stop_head: parameter width != max_len");
  return logits;
}

Var tcn_stack(Graph& g, const BoundParams& p, const NetConfig& config, Var sequence) {
  const Tensor& s = g.value(sequence);
  const std::size_t batch = s.dim(0), steps = s.dim(1), state = s.dim(2);
  Var x = sequence;
  for (std::size_t l = 0; l < config.tcn_layers; ++l) {
    const std::string prefix = layer_name("tcn.conv", l);
    const std::size_t dilation = std::size_t{1} << l;
    Var flat_now = g.reshape(x, {batch * steps, state});
    Var conv = g.matmul(flat_now, p[prefix + ".now"]);
    if (dilation < steps) {
      Var flat_past = g.reshape(g.shift_steps(x, dilation), {batch * steps, state});
      conv = g.add(conv, g.matmul(flat_past, p[prefix + ".past"]));
    }
    Var activated = g.relu(g.add_bias(conv, p[prefix + ".b"]));
    // Residual connection keeps the stack trainable at depth 6.
    x = g.add(x, g.reshape(activated, {batch, steps, state}));
  }
  Var logits = dense(g, g.reshape(x, {batch * steps, state}), p["tcn.out.w"], p["tcn.out.b"]);
  const std::size_t classes = g.value(logits).dim(1);
  return g.reshape(logits, {batch, steps, classes});
}

Var tcn_decode(Graph& g, const BoundParams& p, const NetConfig& config, Var latent) {
  const std::size_t batch = g.value(latent).dim(0);
  Var projected = dense(g, latent, p["tcn.in.w"], p["tcn.in.b"]);
  Var sequence = g.add(g.repeat_steps(projected, config.max_len), g.repeat_batch(p["tcn.pos"], batch));
  return tcn_stack(g, p, config, sequence);
}

Tensor encode(const ModelParams& params, const EncoderConfig& config, std::span<const double> raster) {
  if (raster.size() != config.input_dim) {
    throw std::invalid_argument("encode: raster has " + std::to_string(raster.size()) + " values, expected " +
                                std::to_string(config.input_dim));
  }
  Graph g;
  BoundParams p(g, params, false);
  Var x = g.input(Tensor({1, raster.size()}, std::vector<double>(raster.begin(), raster.end())));
  return g.value(encode(g, p, config, x));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t predicted_length(std::span<const double> stop_logits) { return argmax(stop_logits) + 1; }

}  // namespace permseq
