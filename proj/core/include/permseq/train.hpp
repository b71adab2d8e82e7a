#pragma once

// Losses, the Adam optimiser, training loops and evaluation for the five
// model kinds:
//
//   bc             per-step classification, argmax decoding
//   bc_hungarian   the same network decoded by Hungarian assignment
//   tcn            temporal-conv decoder, argmax decoding
//   tcn_hungarian  the same network decoded by Hungarian assignment
//   sinkhorn       permutation head trained through the Sinkhorn operator,
//                  decoded by hard assignment

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "permseq/dataset.hpp"
#include "permseq/diffcore.hpp"
#include "permseq/nets.hpp"
#include "permseq/sinkhorn.hpp"

namespace permseq {

enum class ModelKind { kBc, kBcHungarian, kTcn, kTcnHungarian, kSinkhorn };

inline constexpr std::array<ModelKind, 5> kAllModelKinds = {ModelKind::kBc, ModelKind::kBcHungarian, ModelKind::kTcn,
                                                            ModelKind::kTcnHungarian, ModelKind::kSinkhorn};

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
HeadKind head_for(ModelKind kind);
bool is_permutation_constrained(ModelKind kind);

struct TrainConfig {
  ModelKind kind = ModelKind::kSinkhorn;
  double learning_rate = 3e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  SinkhornConfig sinkhorn;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::vector<std::size_t> hidden_dims{256, 128};
  std::size_t latent_dim = 128;

  void validate() const;
};

struct Model {
  // Kind the network was trained as; decoding may use its Hungarian sibling.
  ModelKind kind = ModelKind::kSinkhorn;
  NetConfig net;
  SinkhornConfig sinkhorn;
  ModelParams params;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_history;
};

NetConfig net_config_for(const TrainConfig& config, const Dataset& data);
Model init_model(const TrainConfig& config, const Dataset& data);

TrainResult train(const TrainConfig& config, const Dataset& data);

class Adam {
 public:
  Adam(double learning_rate, double beta1, double beta2, double epsilon);
  void step(ModelParams& params, const std::map<std::string, Tensor>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// -(1/k) sum_{i<k} sum_j y_ij log softmax(x)_ij, averaged over the batch.
// logits and targets are [B,n,n] (or [n,n] with a single length).
Var bc_loss(Graph& g, Var logits, const Tensor& targets, std::span<const std::size_t> lengths);

// Per-step cross-entropy over n actions plus a stop class (index n). Step i < k
// targets action i, step k (when k < steps) targets stop, later steps are
// ignored. Mean over counted steps, then over the batch. logits: [B,steps,n+1].
Var tcn_loss(Graph& g, Var logits, std::span<const std::vector<int>> sequences);

// Cross-entropy over length classes {1..max_len}; logits [B,max_len].
Var stop_loss(Graph& g, Var logits, std::span<const std::size_t> lengths);

struct Metrics {
  double precision = 0.0;
  double exact_rate = 0.0;
  double repetition_rate = 0.0;
  double length_accuracy = 0.0;
  std::size_t items = 0;
};

std::vector<std::vector<int>> predict(const Model& model, ModelKind decode_as, const Dataset& data);
Metrics score(std::span<const std::vector<int>> predictions, const Dataset& data);
Metrics evaluate(const Model& model, ModelKind decode_as, const Dataset& data);

}  // namespace permseq
