#include "verifree/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace verifree {

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::Verifier: return "verifier";
    case RewardKind::VeriFree: return "verifree";
    case RewardKind::VeriFreeEquiv: return "verifree-equiv";
    case RewardKind::Jlb: return "jlb";
    case RewardKind::Latro: return "latro";
    case RewardKind::ShapedVerifier: return "shaped-verifier";
  }
  return "?";
}

RewardValue reward_verifier(const TokenSeq& answer, const TaskInstance& task) {
  RewardValue r;
  r.kind = RewardKind::Verifier;
  bool correct = answer == task.reference;
  if (!correct) {
    for (const TokenSeq& alt : task.equivalents) {
      if (answer == alt) { correct = true; break; }
    }
  }
  r.value = correct ? 1.0 : 0.0;
  return r;
}

double answer_probability(const Policy& policy, const TaskInstance& task, const TokenSeq& trace,
                          const TokenSeq& answer) {
  TokenSeq history = task.prompt;
  history.insert(history.end(), trace.begin(), trace.end());
  return std::exp(logprob(policy, history, answer));
}

RewardValue reward_verifree(const Policy& policy, const TaskInstance& task,
                            const TokenSeq& trace) {
  RewardValue r;
  r.kind = RewardKind::VeriFree;
  r.value = answer_probability(policy, task, trace, task.reference);
  return r;
}

RewardValue reward_verifree_equiv(const Policy& policy, const TaskInstance& task,
                                  const TokenSeq& trace) {
  if (task.equivalents.empty()) {
    throw std::invalid_argument("reward_verifree_equiv requires a non-empty equivalence set");
  }
  RewardValue r;
  r.kind = RewardKind::VeriFreeEquiv;
  for (const TokenSeq& alt : task.equivalents) {
    r.value += answer_probability(policy, task, trace, alt);
  }
  if (r.value > 1.0 + 1e-9) {
    throw std::runtime_error("equivalence-class probability mass " + std::to_string(r.value) +
                             " exceeds 1 + 1e-9; equivalents are not mutually exclusive");
  }
  return r;
}

RewardValue reward_jlb(const Policy& policy, const TaskInstance& task, const TokenSeq& trace) {
  TokenSeq history = task.prompt;
  history.insert(history.end(), trace.begin(), trace.end());
  RewardValue r;
  r.kind = RewardKind::Jlb;
  r.value = logprob(policy, history, task.reference);
  return r;
}

RewardValue reward_latro(const Policy& policy, const Policy& ref_policy, const TaskInstance& task,
                         const TokenSeq& trace) {
  if (policy.vocab().size != ref_policy.vocab().size) {
    throw std::invalid_argument("latro policies must share a vocab");
  }
  RewardValue r;
  r.kind = RewardKind::Latro;
  const double jlb = reward_jlb(policy, task, trace).value;
  const double ratio = logprob(policy, task.prompt, trace) -
                       logprob(ref_policy, task.prompt, trace);
  r.answer_logprob = jlb;
  r.trace_log_ratio = ratio;
  r.value = jlb - ratio;
  return r;
}

RewardValue reward_shaped_verifier(const TokenSeq& answer, const TaskInstance& task,
                                   bool format_ok) {
  RewardValue r;
  r.kind = RewardKind::ShapedVerifier;
  const double base = reward_verifier(answer, task).value;
  const double format_penalty = format_ok ? 0.0 : -0.5;
  const double diff = std::abs(static_cast<double>(task.reference.size()) -
                               static_cast<double>(answer.size()));
  const double length_penalty = -0.05 * std::min(10.0, diff);
  r.verifier_base = base;
  r.format_penalty = format_penalty;
  r.length_penalty = length_penalty;
  r.value = base + format_penalty + length_penalty;
  return r;
}

}  // namespace verifree
