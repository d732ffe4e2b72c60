#include "verifree/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace verifree {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Verifier: return "verifier";
    case EstimatorKind::VeriFree: return "verifree";
    case EstimatorKind::Jlb: return "jlb";
    case EstimatorKind::Latro: return "latro";
    case EstimatorKind::VeriFreeRloo: return "verifree-rloo";
    case EstimatorKind::VeriFreePpo: return "verifree-ppo";
  }
  return "?";
}

namespace {

TokenSeq concat(const TokenSeq& a, const TokenSeq& b) {
  TokenSeq out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

/// Adds coeff * d(log pi(continuation | history))/d(theta) into grad.
void accumulate_sequence_score(const Policy& policy, TokenSeq history, const TokenSeq& continuation,
                               double coeff, ParamVec& grad) {
  if (coeff == 0.0) return;
  for (TokenId t : continuation) {
    policy.accumulate_score(history, t, coeff, grad);
    history.push_back(t);
  }
}

/// Answer-term contribution for the verifier-free family. For the
/// equivalence class this is sum_y pi(y|ctx) * score(y|ctx), i.e. the exact
/// gradient of the summed probability; the scalar weight returned by the
/// reward functions multiplies the trace term only.
void accumulate_answer_term(const Policy& policy, const TaskInstance& task, const TokenSeq& trace,
                            AnswerScoring scoring, double scale, ParamVec& grad) {
  const TokenSeq history = concat(task.prompt, trace);
  if (scoring == AnswerScoring::Reference) {
    const double confidence = answer_probability(policy, task, trace, task.reference);
    accumulate_sequence_score(policy, history, task.reference, scale * confidence, grad);
    return;
  }
  for (const TokenSeq& alt : task.equivalents) {
    const double p = answer_probability(policy, task, trace, alt);
    accumulate_sequence_score(policy, history, alt, scale * p, grad);
  }
}

double group_reward(const Policy& policy, const TaskInstance& task, const TokenSeq& trace,
                    AnswerScoring scoring) {
  return scoring == AnswerScoring::Reference
             ? reward_verifree(policy, task, trace).value
             : reward_verifree_equiv(policy, task, trace).value;
}

}  // namespace

std::vector<double> leave_one_out_advantages(const std::vector<double>& rewards) {
  const int n = static_cast<int>(rewards.size());
  if (n < 2) {
    throw std::invalid_argument("leave-one-out baseline undefined for group size < 2");
  }
  double total = 0.0;
  for (double r : rewards) total += r;
  std::vector<double> advantages(rewards.size());
  for (int i = 0; i < n; ++i) {
    advantages[static_cast<size_t>(i)] = rewards[static_cast<size_t>(i)] -
                                         (total - rewards[static_cast<size_t>(i)]) / (n - 1);
  }
  return advantages;
}

GradEstimate estimate_verifier(const Policy& policy, const TaskInstance& task,
                               const TokenSeq& trace, const TokenSeq& answer) {
  GradEstimate est;
  est.kind = EstimatorKind::Verifier;
  est.vector = ParamVec::Zero(policy.param_count());
  const double reward = reward_verifier(answer, task).value;
  est.rewards = {reward};
  if (reward != 0.0) {
    accumulate_sequence_score(policy, task.prompt, trace, reward, est.vector);
    accumulate_sequence_score(policy, concat(task.prompt, trace), answer, reward, est.vector);
  }
  return est;
}

GradEstimate estimate_verifree(const Policy& policy, const TaskInstance& task,
                               const TokenSeq& trace, AnswerScoring scoring) {
  GradEstimate est;
  est.kind = EstimatorKind::VeriFree;
  est.vector = ParamVec::Zero(policy.param_count());
  const double reward = group_reward(policy, task, trace, scoring);
  est.rewards = {reward};
  accumulate_sequence_score(policy, task.prompt, trace, reward, est.vector);
  accumulate_answer_term(policy, task, trace, scoring, 1.0, est.vector);
  return est;
}

GradEstimate estimate_jlb(const Policy& policy, const TaskInstance& task, const TokenSeq& trace) {
  GradEstimate est;
  est.kind = EstimatorKind::Jlb;
  est.vector = ParamVec::Zero(policy.param_count());
  const double reward = reward_jlb(policy, task, trace).value;
  est.rewards = {reward};
  accumulate_sequence_score(policy, task.prompt, trace, reward, est.vector);
  accumulate_sequence_score(policy, concat(task.prompt, trace), task.reference, 1.0, est.vector);
  return est;
}

GradEstimate estimate_latro(const Policy& policy, const Policy& ref_policy,
                            const TaskInstance& task, const TokenSeq& trace) {
  GradEstimate est;
  est.kind = EstimatorKind::Latro;
  est.vector = ParamVec::Zero(policy.param_count());
  const double reward = reward_latro(policy, ref_policy, task, trace).value;
  est.rewards = {reward};
  accumulate_sequence_score(policy, task.prompt, trace, reward, est.vector);
  accumulate_sequence_score(policy, concat(task.prompt, trace), task.reference, 1.0, est.vector);
  return est;
}

GradEstimate estimate_verifree_group(const Policy& policy, const TaskInstance& task,
                                     const std::vector<Rollout>& rollouts,
                                     const GroupOptions& options) {
  const int group = static_cast<int>(rollouts.size());
  if (group < 2) {
    throw std::invalid_argument("verifier-free group estimator requires group size >= 2");
  }
  GradEstimate est;
  est.kind = EstimatorKind::VeriFreeRloo;
  est.group_size = group;
  est.vector = ParamVec::Zero(policy.param_count());
  est.rewards.reserve(rollouts.size());
  for (const Rollout& rollout : rollouts) {
    est.rewards.push_back(group_reward(policy, task, rollout.trace, options.scoring));
  }
  est.advantages = options.leave_one_out_baseline ? leave_one_out_advantages(est.rewards)
                                                  : est.rewards;
  const double inv_group = 1.0 / group;
  for (int i = 0; i < group; ++i) {
    const Rollout& rollout = rollouts[static_cast<size_t>(i)];
    accumulate_sequence_score(policy, task.prompt, rollout.trace,
                              inv_group * est.advantages[static_cast<size_t>(i)], est.vector);
    accumulate_answer_term(policy, task, rollout.trace, options.scoring, inv_group, est.vector);
  }
  return est;
}

GradEstimate estimate_verifree_ppo(const Policy& policy, const Policy& old_policy,
                                   const TaskInstance& task, const std::vector<Rollout>& rollouts,
                                   double clip_eps, const GroupOptions& options) {
  const int group = static_cast<int>(rollouts.size());
  if (group < 2) {
    throw std::invalid_argument("verifier-free group estimator requires group size >= 2");
  }
  if (!(clip_eps > 0.0)) throw std::invalid_argument("clip_eps must be positive");
  for (const Rollout& rollout : rollouts) {
    if (rollout.per_token_logprob.size() != rollout.trace.size()) {
      throw std::invalid_argument(
          "rollout is missing sampling-policy log-probabilities for the off-policy estimator");
    }
  }

  GradEstimate est;
  est.kind = EstimatorKind::VeriFreePpo;
  est.group_size = group;
  est.vector = ParamVec::Zero(policy.param_count());
  est.rewards.reserve(rollouts.size());
  for (const Rollout& rollout : rollouts) {
    est.rewards.push_back(group_reward(old_policy, task, rollout.trace, options.scoring));
  }
  est.advantages = options.leave_one_out_baseline ? leave_one_out_advantages(est.rewards)
                                                  : est.rewards;

  const double lo = 1.0 - clip_eps;
  const double hi = 1.0 + clip_eps;
  const double inv_group = 1.0 / group;
  std::size_t tokens_total = 0;
  std::size_t tokens_clipped = 0;

  // Pessimistic surrogate: a token whose ratio is clamped on the improving
  // side contributes nothing; otherwise the gradient is
  // weight * ratio * score(token).
  auto clipped_token = [&](TokenSeq& history, TokenId token, double old_logprob, double weight) {
    const double ratio = std::exp(policy.next_logprobs(history)[token] - old_logprob);
    ++tokens_total;
    const bool clipped = (weight > 0.0 && ratio > hi) || (weight < 0.0 && ratio < lo);
    if (clipped) {
      ++tokens_clipped;
    } else {
      policy.accumulate_score(history, token, weight * ratio, est.vector);
    }
    history.push_back(token);
  };

  for (int i = 0; i < group; ++i) {
    const Rollout& rollout = rollouts[static_cast<size_t>(i)];
    const double advantage = inv_group * est.advantages[static_cast<size_t>(i)];
    const double reward = inv_group * est.rewards[static_cast<size_t>(i)];
    TokenSeq history = task.prompt;
    for (std::size_t t = 0; t < rollout.trace.size(); ++t) {
      clipped_token(history, rollout.trace[t], rollout.per_token_logprob[t], advantage);
    }
    // Reference-answer tokens: old log-probs recomputed from the sampling
    // policy (a single forward evaluation, no sampling involved).
    if (options.scoring == AnswerScoring::Reference) {
      TokenSeq old_history = history;
      for (TokenId t : task.reference) {
        const double old_lp = old_policy.next_logprobs(old_history)[t];
        clipped_token(history, t, old_lp, reward);
        old_history.push_back(t);
      }
    } else {
      for (const TokenSeq& alt : task.equivalents) {
        const double member_weight =
            inv_group * answer_probability(old_policy, task, rollout.trace, alt);
        TokenSeq alt_history = history;
        TokenSeq old_history = history;
        for (TokenId t : alt) {
          const double old_lp = old_policy.next_logprobs(old_history)[t];
          clipped_token(alt_history, t, old_lp, member_weight);
          old_history.push_back(t);
        }
      }
    }
  }
  est.clip_fraction = tokens_total ? static_cast<double>(tokens_clipped) / tokens_total : 0.0;
  return est;
}

GradEstimate estimate_verifier_group(const Policy& policy, const TaskInstance& task,
                                     const std::vector<ResponseSample>& samples, bool shaped,
                                     bool leave_one_out_baseline) {
  const int group = static_cast<int>(samples.size());
  if (group < 2) {
    throw std::invalid_argument("verifier group estimator requires group size >= 2");
  }
  GradEstimate est;
  est.kind = EstimatorKind::Verifier;
  est.group_size = group;
  est.vector = ParamVec::Zero(policy.param_count());
  est.rewards.reserve(samples.size());
  for (const ResponseSample& sample : samples) {
    est.rewards.push_back(shaped
                              ? reward_shaped_verifier(sample.answer, task, sample.format_ok).value
                              : reward_verifier(sample.answer, task).value);
  }
  est.advantages = leave_one_out_baseline ? leave_one_out_advantages(est.rewards) : est.rewards;
  const double inv_group = 1.0 / group;
  for (int i = 0; i < group; ++i) {
    const ResponseSample& sample = samples[static_cast<size_t>(i)];
    const double weight = inv_group * est.advantages[static_cast<size_t>(i)];
    accumulate_sequence_score(policy, task.prompt, sample.rollout.trace, weight, est.vector);
    accumulate_sequence_score(policy, concat(task.prompt, sample.rollout.trace), sample.answer,
                              weight, est.vector);
  }
  return est;
}

}  // namespace verifree
