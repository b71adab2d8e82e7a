#pragma once

// Network heads on top of a shared dense encoder.
//
//   encoder     raster[B,in] -> latent[B,latent_dim]   (dense + relu stack)
//   perm_head   latent -> [B,n,n] logits fed to the Sinkhorn operator
//   bc_head     latent -> [B,n,n] free per-step logits
//   stop_head   latent -> [B,max_len] sequence-length logits
//   tcn_decode  latent -> [B,steps,classes] causal temporal-conv logits

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "permseq/diffcore.hpp"

namespace permseq {

struct EncoderConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{256, 128};
  std::size_t latent_dim = 128;
};

enum class HeadKind { kPermutation, kBehaviourCloning, kTemporal };

struct NetConfig {
  EncoderConfig encoder;
  HeadKind head = HeadKind::kPermutation;
  std::size_t n_actions = 0;
  // Stop-head classes {1..max_len}; also the TCN step count.
  std::size_t max_len = 0;
  bool stop_head = false;
  std::size_t tcn_state_dim = 16;
  std::size_t tcn_layers = 6;

  void validate() const;
};

// Named parameter tensors, iterated in name order.
struct ModelParams {
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  bool all_finite() const;
  std::size_t scalar_count() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
ModelParams init_params(const NetConfig& config, std::uint64_t seed);

// Parameters placed into a graph as differentiable leaves.
class BoundParams {
 public:
  BoundParams(Graph& g, const ModelParams& params, bool trainable);
  Var operator[](const std::string& name) const;
  const std::map<std::string, Var>& vars() const noexcept { return vars_; }

 private:
  std::map<std::string, Var> vars_;
};

Var dense(Graph& g, Var x, Var weight, Var bias);

Var encode(Graph& g, const BoundParams& p, const EncoderConfig& config, Var rasters);
Var perm_head(Graph& g, const BoundParams& p, Var latent, std::size_t n);
Var bc_head(Graph& g, const BoundParams& p, Var latent, std::size_t n);
Var stop_head(Graph& g, const BoundParams& p, Var latent, std::size_t max_len);
Var tcn_decode(Graph& g, const BoundParams& p, const NetConfig& config, Var latent);
// The causal convolution stack applied to an explicit [B,steps,state] sequence.
Var tcn_stack(Graph& g, const BoundParams& p, const NetConfig& config, Var sequence);

// Single-item conveniences for inference and tests.
Tensor encode(const ModelParams& params, const EncoderConfig& config, std::span<const double> raster);

// argmax + 1, ties to the shorter length.
std::size_t predicted_length(std::span<const double> stop_logits);

std::size_t argmax(std::span<const double> values);

}  // namespace permseq
