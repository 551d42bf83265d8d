#pragma once

#include <vector>

#include "toolgym/protocol.hpp"

namespace toolgym::reward {

enum class ValueCheck {
  Schema,     // parameter content judged by kind/range before execution
  Execution,  // additionally zero when the recorded execution failed
};

struct RewardWeights {
  double lambda_tool = 2.0;
  double lambda_acc = 1.0;
  double acc_scale = 1.0;
  bool adaptive = false;
  ValueCheck value_check = ValueCheck::Schema;

  void validate() const;  // throws InvalidArgument
};

struct RewardBreakdown {
  int format = 0;
  std::vector<double> per_call_scores;
  double tool = 0.0;
  double acc = 0.0;
  double total = 0.0;
  int turn_count = 0;  // number of tool-calling turns
  bool adaptive = false;

  json to_json() const;
  static RewardBreakdown from_json(const json& j);

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

// Hierarchical 0-4 score: structure, name, parameter names, parameter values.
double score_tool_call(const protocol::CallDiagnostics& d, ValueCheck mode = ValueCheck::Schema);

RewardBreakdown trajectory_reward(const protocol::Trajectory& traj,
                                  const protocol::ValidationReport& report, bool answer_correct,
                                  const RewardWeights& w);

// Asymmetric total: full credit when correct, tool credit only when wrong
// with at least one call, zero for unsupported guesses.
double adaptive_total(const RewardBreakdown& breakdown, bool answer_correct, const RewardWeights& w);

}  // namespace toolgym::reward
