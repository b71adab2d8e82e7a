#include "permseq/sinkhorn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "permseq/assign.hpp"

namespace permseq {

namespace {

void check_square_batch(const Tensor& t, const char* what) {
  const bool ok = (t.rank() == 2 || t.rank() == 3) && t.dim(t.rank() - 1) == t.dim(t.rank() - 2);
  if (!ok) throw std::invalid_argument(std::string(what) + ": expected [n,n] or [B,n,n], got " + to_string(t.shape()));
}

}  // namespace

Var sinkhorn(Graph& g, Var logits, double tau, int iterations) {
  const Tensor& x = g.value(logits);
  check_square_batch(x, "sinkhorn");
  if (!x.all_finite()) throw std::domain_error("sinkhorn: logits must be finite");
  if (!(tau >= kMinTemperature)) throw std::invalid_argument("sinkhorn: tau must be >= 1e-3");
  if (iterations < 1) throw std::invalid_argument("sinkhorn: iterations must be >= 1");
  Var s = g.scale(logits, 1.0 / tau);
  for (int l = 0; l < iterations; ++l) {
    s = g.log_row_normalize(s);
    s = g.log_col_normalize(s);
  }
  return g.exp(s);
}

Tensor sinkhorn_operator(const Tensor& logits, double tau, int iterations) {
  Graph g;
  Var p = sinkhorn(g, g.input(logits), tau, iterations);
  return g.value(p);
}

namespace detail {

Tensor sinkhorn_exp_domain(const Tensor& logits, int iterations) {
  Graph g;
  Var s = g.exp(g.input(logits));
  for (int l = 0; l < iterations; ++l) s = g.col_normalize(g.row_normalize(s));
  return g.value(s);
}

}  // namespace detail

double sample_gumbel(Rng& rng) { return -std::log(-std::log(uniform_open(rng))); }

Tensor gumbel_perturb(const Tensor& logits, double noise_scale, Rng& rng) {
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("gumbel_perturb: noise_scale must be non-negative");
  Tensor out = logits;
  if (noise_scale == 0.0) return out;
  for (double& v : out.values()) v += noise_scale * sample_gumbel(rng);
  return out;
}

Tensor gumbel_perturb(const Tensor& logits, double noise_scale, std::uint64_t seed) {
  Rng rng(seed);
  return gumbel_perturb(logits, noise_scale, rng);
}

PermutationMatrix::PermutationMatrix(std::vector<std::size_t> columns) : columns_(std::move(columns)) {
  if (!is_permutation(columns_, columns_.size())) throw std::invalid_argument("not a permutation");
}

Tensor PermutationMatrix::dense() const {
  const std::size_t n = columns_.size();
  Tensor out({n, n});
  for (std::size_t r = 0; r < n; ++r) out.at(r, columns_[r]) = 1.0;
  return out;
}

PermutationMatrix hard_assignment(const Tensor& doubly_stochastic) {
  Tensor negated = doubly_stochastic;
  for (double& v : negated.values()) v = -v;
  return PermutationMatrix(hungarian(CostMatrix(negated)).perm);
}

Tensor one_hot_rows(std::span<const int> actions, std::size_t n) {
  if (actions.size() > n) throw std::invalid_argument("one_hot_rows: sequence longer than action set");
  Tensor out({n, n});
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] < 0 || static_cast<std::size_t>(actions[i]) >= n) {
      throw std::invalid_argument("one_hot_rows: action " + std::to_string(actions[i]) + " out of range");
    }
    out.at(i, static_cast<std::size_t>(actions[i])) = 1.0;
  }
  return out;
}

Var masked_perm_loss(Graph& g, Var perm, const Tensor& target, std::size_t k) {
  const Tensor& p = g.value(perm);
  if (p.rank() != 2 || target.shape() != p.shape()) {
    throw std::invalid_argument("masked_perm_loss: shape mismatch " + to_string(p.shape()) + " vs " +
                                to_string(target.shape()));
  }
  Var batched = g.reshape(perm, {1, p.dim(0), p.dim(1)});
  Tensor targets({1, target.dim(0), target.dim(1)}, std::vector<double>(target.values().begin(), target.values().end()));
  const std::size_t lengths[] = {k};
  return masked_perm_loss(g, batched, targets, lengths);
}

Var masked_perm_loss(Graph& g, Var perm, const Tensor& targets, std::span<const std::size_t> lengths) {
  const Tensor& p = g.value(perm);
  if (p.rank() != 3 || p.shape() != targets.shape() || p.dim(1) != p.dim(2)) {
    throw std::invalid_argument("masked_perm_loss: shape mismatch " + to_string(p.shape()) + " vs " +
                                to_string(targets.shape()));
  }
  const std::size_t batch = p.dim(0), n = p.dim(1);
  if (lengths.size() != batch) throw std::invalid_argument("masked_perm_loss: one length per batch item required");
  Tensor weights(p.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t k = lengths[b];
    if (k < 1 || k > n) {
      throw std::invalid_argument("masked_perm_loss: active length " + std::to_string(k) + " outside [1, " +
                                  std::to_string(n) + "]");
    }
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t ones = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = targets[(b * n + i) * n + j];
        if (v == 1.0) {
          ++ones;
        } else if (v != 0.0) {
          ones = 2;
        }
        weights[(b * n + i) * n + j] = 1.0 / static_cast<double>(k * batch);
      }
      if (ones != 1) throw std::invalid_argument("masked_perm_loss: active target row " + std::to_string(i) + " is not one-hot");
    }
  }
  Var diff = g.sub(perm, g.input(targets));
  return g.sum(g.mul_const(g.square(diff), weights));
}

}  // namespace permseq
