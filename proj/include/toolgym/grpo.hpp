#pragma once

#include <optional>
#include <span>
#include <vector>

namespace toolgym::grpo {

struct GrpoConfig {
  double clip_epsilon = 0.2;
  double kl_beta = 0.0;
  double std_epsilon = 1e-8;

  void validate() const;
};

// Per-token log-probabilities of one sampled trajectory.
struct TokenSequence {
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::optional<std::vector<double>> logp_ref;
};

using TokenBatch = std::vector<TokenSequence>;

// Deterministic pairwise (tree) summation.
double pairwise_sum(std::span<const double> values);

// (r_i - mean) / max(std, std_epsilon) with population std. A group whose
// rewards are all equal yields exact zeros.
std::vector<double> group_advantages(std::span<const double> rewards, const GrpoConfig& cfg = {});

// Group-mean of per-token clipped surrogate terms, each trajectory weighted
// by 1 / (G * |tau_i|), minus beta * kl_penalty when beta > 0.
double clipped_surrogate(const TokenBatch& batch, std::span<const double> advantages,
                         const GrpoConfig& cfg = {});

// Same weighting, without clipping; equals clipped_surrogate whenever every
// ratio lies inside [1 - eps, 1 + eps].
double unclipped_surrogate(const TokenBatch& batch, std::span<const double> advantages);

// k3 estimator r - log r - 1 with r = exp(logp_ref - logp_new).
double kl_penalty(const TokenBatch& batch);

}  // namespace toolgym::grpo
