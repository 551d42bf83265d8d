#include "toolgym/reward.hpp"

namespace toolgym::reward {

void RewardWeights::validate() const {
  if (lambda_tool < 0 || lambda_acc < 0) {
    throw Error(ErrorKind::InvalidArgument, "reward weights must be non-negative");
  }
  if (lambda_tool == 0 && lambda_acc == 0) {
    throw Error(ErrorKind::InvalidArgument, "lambda_tool and lambda_acc cannot both be zero");
  }
}

double score_tool_call(const protocol::CallDiagnostics& d, ValueCheck mode) {
  if (!d.wrapped) return 0.0;
  if (!d.name_known) return 1.0;
  if (d.param_total == 0) return 4.0;
  const double total = d.param_total;
  if (d.name_hits < d.param_total) return 2.0 + d.name_hits / total;
  int values = d.value_hits;
  if (mode == ValueCheck::Execution && d.executed_ok.has_value() && !*d.executed_ok) values = 0;
  return 3.0 + values / total;
}

RewardBreakdown trajectory_reward(const protocol::Trajectory& /*traj*/,
                                  const protocol::ValidationReport& report, bool answer_correct,
                                  const RewardWeights& w) {
  RewardBreakdown b;
  b.adaptive = w.adaptive;
  b.format = report.all_formatted() ? 1 : 0;
  double sum = 0.0;
  for (const auto& call : report.calls) {
    const double s = score_tool_call(call, w.value_check);
    b.per_call_scores.push_back(s);
    sum += s;
  }
  b.turn_count = static_cast<int>(b.per_call_scores.size());
  b.tool = b.turn_count == 0 ? 0.0 : sum / b.turn_count;
  b.acc = answer_correct ? w.acc_scale : 0.0;
  b.total = w.adaptive ? adaptive_total(b, answer_correct, w)
                       : b.format * (w.lambda_tool * b.tool + w.lambda_acc * b.acc);
  return b;
}

double adaptive_total(const RewardBreakdown& breakdown, bool answer_correct, const RewardWeights& w) {
  if (answer_correct) return breakdown.format * (w.lambda_tool * 4.0 + w.lambda_acc * w.acc_scale);
  if (breakdown.turn_count > 0) return breakdown.format * w.lambda_tool * breakdown.tool;
  return 0.0;
}

json RewardBreakdown::to_json() const {
  return {{"format", format},  {"per_call_scores", per_call_scores},
          {"tool", tool},      {"acc", acc},
          {"total", total},    {"turn_count", turn_count},
          {"adaptive", adaptive}};
}

RewardBreakdown RewardBreakdown::from_json(const json& j) {
  RewardBreakdown b;
  b.format = j.at("format").get<int>();
  b.per_call_scores = j.at("per_call_scores").get<std::vector<double>>();
  b.tool = j.at("tool").get<double>();
  b.acc = j.at("acc").get<double>();
  b.total = j.at("total").get<double>();
  b.turn_count = j.at("turn_count").get<int>();
  b.adaptive = j.value("adaptive", false);
  return b;
}

}  // namespace toolgym::reward
