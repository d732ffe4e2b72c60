#pragma once

#include <optional>
#include <string>

#include "verifree/policy.hpp"
#include "verifree/seq.hpp"

namespace verifree {

enum class RewardKind {
  Verifier,
  VeriFree,
  VeriFreeEquiv,
  Jlb,
  Latro,
  ShapedVerifier,
};

std::string to_string(RewardKind kind);

/// Scalar reward with its provenance and, where applicable, the additive
/// components it was assembled from.
struct RewardValue {
  double value = 0.0;
  RewardKind kind = RewardKind::Verifier;

  // shaped-verifier components (sum to value together with verifier_base)
  std::optional<double> verifier_base;
  std::optional<double> format_penalty;
  std::optional<double> length_penalty;

  // latro components
  std::optional<double> answer_logprob;
  std::optional<double> trace_log_ratio;
};

/// 1 if answer is the reference or a member of the task's equivalence set.
RewardValue reward_verifier(const TokenSeq& answer, const TaskInstance& task);

/// pi(reference | prompt ++ trace): the policy's own confidence in the
/// reference answer given the sampled trace. Always in (0, 1].
RewardValue reward_verifree(const Policy& policy, const TaskInstance& task, const TokenSeq& trace);

/// Sum of answer probabilities over the task's equivalence set.
RewardValue reward_verifree_equiv(const Policy& policy, const TaskInstance& task,
                                  const TokenSeq& trace);

/// log pi(reference | prompt ++ trace), the latent-bound reward.
RewardValue reward_jlb(const Policy& policy, const TaskInstance& task, const TokenSeq& trace);

/// jlb reward minus the trace log-ratio log(pi(trace)/pi_ref(trace)).
RewardValue reward_latro(const Policy& policy, const Policy& ref_policy, const TaskInstance& task,
                         const TokenSeq& trace);

/// Verifier reward with a -0.5 broken-format penalty and a
/// -0.05 * min(10, |len(reference) - len(answer)|) length penalty.
RewardValue reward_shaped_verifier(const TokenSeq& answer, const TaskInstance& task,
                                   bool format_ok);

/// Confidence helper used by estimators: pi(answer | prompt ++ trace).
double answer_probability(const Policy& policy, const TaskInstance& task, const TokenSeq& trace,
                          const TokenSeq& answer);

}  // namespace verifree
