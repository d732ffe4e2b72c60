#pragma once

#include <string>
#include <vector>

#include "verifree/policy.hpp"
#include "verifree/rewards.hpp"
#include "verifree/seq.hpp"

namespace verifree {

enum class EstimatorKind {
  Verifier,
  VeriFree,
  Jlb,
  Latro,
  VeriFreeRloo,
  VeriFreePpo,
};

std::string to_string(EstimatorKind kind);

/// Ascent direction produced by one estimator from one rollout (or one
/// rollout group), with per-rollout rewards and advantages attached.
struct GradEstimate {
  ParamVec vector;
  EstimatorKind kind = EstimatorKind::VeriFree;
  int group_size = 1;
  std::vector<double> rewards;
  std::vector<double> advantages;
  double clip_fraction = 0.0;
};

/// Answer-term reward selection for the verifier-free estimators: score the
/// single reference, or the whole equivalence class.
enum class AnswerScoring { Reference, EquivalenceClass };

/// Single-sample verifier estimator: binary reward times the summed score of
/// the trace and of the sampled answer.
GradEstimate estimate_verifier(const Policy& policy, const TaskInstance& task,
                               const TokenSeq& trace, const TokenSeq& answer);

/// Single-sample verifier-free estimator: the answer confidence weights both
/// the trace score and the reference-answer score. With
/// AnswerScoring::EquivalenceClass the answer term becomes the
/// probability-weighted sum of member scores (the exact gradient of the
/// summed-probability reward).
GradEstimate estimate_verifree(const Policy& policy, const TaskInstance& task,
                               const TokenSeq& trace,
                               AnswerScoring scoring = AnswerScoring::Reference);

/// Latent-bound estimator: log-confidence weights the trace score; the
/// reference-answer score enters with weight 1.
GradEstimate estimate_jlb(const Policy& policy, const TaskInstance& task, const TokenSeq& trace);

/// As jlb with the trace weight shifted by -log(pi(trace)/pi_ref(trace)).
GradEstimate estimate_latro(const Policy& policy, const Policy& ref_policy,
                            const TaskInstance& task, const TokenSeq& trace);

struct GroupOptions {
  bool leave_one_out_baseline = true;  // false reproduces the no-baseline ablation (A_i = R_i)
  AnswerScoring scoring = AnswerScoring::Reference;
};

/// Group estimator with the leave-one-out baseline on the trace term only:
/// (1/G) sum_i [A_i * score(trace_i) + R_i * score(reference | trace_i)],
/// A_i = R_i - mean of the other rewards. Token gradients are summed, never
/// divided by response length.
GradEstimate estimate_verifree_group(const Policy& policy, const TaskInstance& task,
                                     const std::vector<Rollout>& rollouts,
                                     const GroupOptions& options = {});

/// Off-policy variant: per-token probability ratios against the sampling
/// policy, clipped to [1-eps, 1+eps] with the pessimistic surrogate (clipped
/// tokens contribute no gradient). Advantages and rewards are computed under
/// the sampling policy.
GradEstimate estimate_verifree_ppo(const Policy& policy, const Policy& old_policy,
                                   const TaskInstance& task, const std::vector<Rollout>& rollouts,
                                   double clip_eps, const GroupOptions& options = {});

/// One trace plus a sampled answer, as produced by verifier-style rollouts.
struct ResponseSample {
  Rollout rollout;
  TokenSeq answer;
  bool format_ok = true;
};

/// Group form of the verifier baseline: whole-trajectory scores weighted by
/// leave-one-out advantages of the (optionally shaped) verifier reward.
GradEstimate estimate_verifier_group(const Policy& policy, const TaskInstance& task,
                                     const std::vector<ResponseSample>& samples, bool shaped,
                                     bool leave_one_out_baseline = true);

/// Leave-one-out advantages: A_i = R_i - mean_{j != i} R_j. Requires G >= 2.
std::vector<double> leave_one_out_advantages(const std::vector<double>& rewards);

}  // namespace verifree
