#pragma once

// Sinkhorn operator, Gumbel perturbation, hard assignment and the masked
// permutation loss used to train permutation-valued heads.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "permseq/diffcore.hpp"
#include "permseq/random.hpp"

namespace permseq {

inline constexpr double kMinTemperature = 1e-3;

struct SinkhornConfig {
  double tau = 1.0;
  int iterations = 20;
  // Gumbel noise applied to logits during training only.
  double noise_scale = 1.0;
};

// exp of L alternating log-row / log-column normalisations of logits / tau.
// Accepts [n,n] or a batch [B,n,n]. Column sums are exact up to rounding
// because the column pass runs last.
Var sinkhorn(Graph& g, Var logits, double tau, int iterations);
Tensor sinkhorn_operator(const Tensor& logits, double tau, int iterations);

namespace detail {
// Exp-domain reference iteration; only stable for moderate logits.
Tensor sinkhorn_exp_domain(const Tensor& logits, int iterations);
}  // namespace detail

// Standard Gumbel draw -log(-log(u)).
double sample_gumbel(Rng& rng);
Tensor gumbel_perturb(const Tensor& logits, double noise_scale, Rng& rng);
Tensor gumbel_perturb(const Tensor& logits, double noise_scale, std::uint64_t seed);

class PermutationMatrix {
 public:
  explicit PermutationMatrix(std::vector<std::size_t> columns);

  std::size_t size() const noexcept { return columns_.size(); }
  // Column holding the 1 in each row.
  const std::vector<std::size_t>& columns() const noexcept { return columns_; }
  Tensor dense() const;

 private:
  std::vector<std::size_t> columns_;
};

// Permutation maximising the selected mass of P (Hungarian on -P).
PermutationMatrix hard_assignment(const Tensor& doubly_stochastic);

// n x n one-hot target: row i selects actions[i]; rows past the sequence are zero.
Tensor one_hot_rows(std::span<const int> actions, std::size_t n);

// Mean over the first k rows of ||P_i - target_i||^2.
Var masked_perm_loss(Graph& g, Var perm, const Tensor& target, std::size_t k);
// Batched form over [B,n,n]; averages the per-item losses.
Var masked_perm_loss(Graph& g, Var perm, const Tensor& targets, std::span<const std::size_t> lengths);

}  // namespace permseq
