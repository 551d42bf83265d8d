#include "toolgym/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "toolgym/error.hpp"

namespace toolgym::grpo {

namespace {

void check_shapes(const TokenBatch& batch, std::span<const double> advantages) {
  if (batch.empty()) throw Error(ErrorKind::ShapeMismatch, "empty batch");
  if (advantages.size() != batch.size()) {
    throw Error(ErrorKind::ShapeMismatch, "one advantage per trajectory required");
  }
  for (const TokenSequence& seq : batch) {
    if (seq.logp_new.empty() || seq.logp_new.size() != seq.logp_old.size()) {
      throw Error(ErrorKind::ShapeMismatch, "new/old log-prob sequences must be non-empty and equal length");
    }
    if (seq.logp_ref && seq.logp_ref->size() != seq.logp_new.size()) {
      throw Error(ErrorKind::ShapeMismatch, "reference log-probs length differs");
    }
  }
}

template <typename TermFn>
double weighted_token_mean(const TokenBatch& batch, TermFn term) {
  const double group = static_cast<double>(batch.size());
  std::vector<double> per_traj;
  per_traj.reserve(batch.size());
  std::vector<double> terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TokenSequence& seq = batch[i];
    terms.clear();
    for (std::size_t j = 0; j < seq.logp_new.size(); ++j) terms.push_back(term(i, j));
    per_traj.push_back(pairwise_sum(terms) / (group * static_cast<double>(seq.logp_new.size())));
  }
  return pairwise_sum(per_traj);
}

}  // namespace

void GrpoConfig::validate() const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "clip epsilon must lie in (0, 1)");
  }
  if (kl_beta < 0.0) throw Error(ErrorKind::InvalidArgument, "kl beta must be non-negative");
  if (!(std_epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "std epsilon must be positive");
}

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::vector<double> group_advantages(std::span<const double> rewards, const GrpoConfig& cfg) {
  if (rewards.size() < 2) throw Error(ErrorKind::DegenerateGroup, "a group needs at least 2 rewards");
  std::vector<double> out(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) {
    return out;
  }
  const double n = static_cast<double>(rewards.size());
  const double mean = pairwise_sum(rewards) / n;
  std::vector<double> sq(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) sq[i] = (rewards[i] - mean) * (rewards[i] - mean);
  const double stddev = std::sqrt(pairwise_sum(sq) / n);
  const double denom = std::max(stddev, cfg.std_epsilon);
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / denom;
  return out;
}

double clipped_surrogate(const TokenBatch& batch, std::span<const double> advantages,
                         const GrpoConfig& cfg) {
  cfg.validate();
  check_shapes(batch, advantages);
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;
  const double objective = weighted_token_mean(batch, [&](std::size_t i, std::size_t j) {
    const double ratio = std::exp(batch[i].logp_new[j] - batch[i].logp_old[j]);
    const double a = advantages[i];
    return std::min(ratio * a, std::clamp(ratio, lo, hi) * a);
  });
  if (cfg.kl_beta > 0.0) return objective - cfg.kl_beta * kl_penalty(batch);
  return objective;
}

double unclipped_surrogate(const TokenBatch& batch, std::span<const double> advantages) {
  check_shapes(batch, advantages);
  return weighted_token_mean(batch, [&](std::size_t i, std::size_t j) {
    return std::exp(batch[i].logp_new[j] - batch[i].logp_old[j]) * advantages[i];
  });
}

double kl_penalty(const TokenBatch& batch) {
  if (batch.empty()) throw Error(ErrorKind::ShapeMismatch, "empty batch");
  for (const TokenSequence& seq : batch) {
    if (!seq.logp_ref) throw Error(ErrorKind::MissingReference, "reference log-probs required for KL");
    if (seq.logp_new.empty() || seq.logp_ref->size() != seq.logp_new.size()) {
      throw Error(ErrorKind::ShapeMismatch, "reference log-probs length differs");
    }
  }
  return weighted_token_mean(batch, [&](std::size_t i, std::size_t j) {
    const double d = (*batch[i].logp_ref)[j] - batch[i].logp_new[j];
    // exp(d) - d - 1, written to stay accurate near d = 0.
    return std::max(0.0, std::expm1(d) - d);
  });
}

}  // namespace toolgym::grpo
