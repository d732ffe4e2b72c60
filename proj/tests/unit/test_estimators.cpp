#include <doctest.h>

#include <cmath>
#include <numeric>

#include "verifree/estimators.hpp"
#include "verifree/fixtures.hpp"
#include "verifree/oracle.hpp"
#include "verifree/rng.hpp"

using namespace verifree;

namespace {

const Vocab kVocab4 = Vocab::lab(4);

TaskInstance simple_task(TokenId reference = 1) {
  TaskInstance task;
  task.vocab = kVocab4;
  task.prompt = {0};
  task.reference = {reference};
  task.trace_budget = 2;
  task.id = "estimator-test";
  task.validate();
  return task;
}

Rollout rollout_for(const Policy& policy, const TaskInstance& task, const TokenSeq& trace) {
  Rollout rollout;
  rollout.trace = trace;
  TokenSeq history = task.prompt;
  for (TokenId t : trace) {
    const double lp = policy.next_logprobs(history)[t];
    rollout.per_token_logprob.push_back(lp);
    rollout.per_token_sample_logprob.push_back(lp);
    rollout.total_logprob += lp;
    rollout.total_sample_logprob += lp;
    history.push_back(t);
  }
  rollout.boundary_terminated = ends_with_answer_open(task.vocab, trace);
  return rollout;
}

/// Probability-weighted sum of the single-sample verifier estimator over the
/// whole (trace, answer) space.
ParamVec exact_mean_verifier(const Policy& policy, const TaskInstance& task) {
  ParamVec mean = ParamVec::Zero(policy.param_count());
  for (const TokenSeq& trace : enumerate_traces(task.vocab, task.trace_budget)) {
    const double trace_prob = std::exp(logprob(policy, task.prompt, trace));
    TokenSeq history = task.prompt;
    history.insert(history.end(), trace.begin(), trace.end());
    const Eigen::VectorXd answer_lp = policy.next_logprobs(history);
    for (TokenId answer = 0; answer < task.vocab.size; ++answer) {
      mean += trace_prob * std::exp(answer_lp[answer]) *
              estimate_verifier(policy, task, trace, {answer}).vector;
    }
  }
  return mean;
}

ParamVec exact_mean_verifree(const Policy& policy, const TaskInstance& task,
                             AnswerScoring scoring = AnswerScoring::Reference) {
  ParamVec mean = ParamVec::Zero(policy.param_count());
  for (const TokenSeq& trace : enumerate_traces(task.vocab, task.trace_budget)) {
    mean += std::exp(logprob(policy, task.prompt, trace)) *
            estimate_verifree(policy, task, trace, scoring).vector;
  }
  return mean;
}

}  // namespace

TEST_CASE("wrong answers annihilate the verifier estimate") {
  const Policy policy = Policy::random(kVocab4, PolicyKind::Tabular, 2, 0.7, 41);
  const TaskInstance task = simple_task();
  const GradEstimate est = estimate_verifier(policy, task, {3}, {0});
  CHECK(est.vector.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-sample estimators are unbiased for the oracle gradient") {
  for (int i = 0; i < 6; ++i) {
    const Fixture fixture = make_fixture(i, 2024, /*unique_answer=*/true);
    const ParamVec oracle = exact_gradient(fixture.policy, fixture.task, ObjectiveMode::Verifier);
    CHECK((exact_mean_verifier(fixture.policy, fixture.task) - oracle).cwiseAbs().maxCoeff() <
          1e-10);
    CHECK((exact_mean_verifree(fixture.policy, fixture.task) - oracle).cwiseAbs().maxCoeff() <
          1e-10);
  }
}

TEST_CASE("equivalence-scored estimator is unbiased for the equivalence objective") {
  for (int i = 2; i < 18; i += 3) {  // multi-answer fixtures
    const Fixture fixture = make_fixture(i, 515);
    if (fixture.task.equivalents.empty()) continue;
    const ParamVec oracle = exact_gradient(fixture.policy, fixture.task, ObjectiveMode::Verifier);
    const ParamVec mean =
        exact_mean_verifree(fixture.policy, fixture.task, AnswerScoring::EquivalenceClass);
    CHECK((mean - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("conditional answer expectation reproduces the verifier-free estimate") {
  for (int i = 0; i < 8; ++i) {
    const Fixture fixture = make_fixture(i, 99, /*unique_answer=*/true);
    for (const TokenSeq& trace :
         enumerate_traces(fixture.task.vocab, fixture.task.trace_budget)) {
      const ParamVec expectation =
          conditional_verifier_expectation(fixture.policy, fixture.task, trace);
      const ParamVec direct = estimate_verifree(fixture.policy, fixture.task, trace).vector;
      CHECK((expectation - direct).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("degenerate policy concentrates on the greedy trajectory") {
  Policy policy(kVocab4, PolicyKind::Tabular, 1);
  ParamVec params = ParamVec::Zero(policy.param_count());
  for (int ctx = 0; ctx < policy.layout().num_contexts; ++ctx) {
    params[policy.layout().coord_tabular(ctx, kVocab4.answer_open_id)] = 60.0;
  }
  const TaskInstance task = simple_task(kVocab4.answer_open_id);  // greedy answer is OPEN too
  policy.set_params(params);
  const TokenSeq trace = {kVocab4.answer_open_id};
  const GradEstimate est = estimate_verifier(policy, task, trace, task.reference);
  CHECK(est.rewards[0] == 1.0);
  // all scores vanish because the realized tokens carry probability ~1
  CHECK(est.vector.cwiseAbs().maxCoeff() < 1e-10);
  const GradEstimate vf = estimate_verifree(policy, task, trace);
  CHECK(vf.rewards[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(vf.vector.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("latent-bound estimator coefficients") {
  const TaskInstance task = simple_task();
  SUBCASE("uniform policy carries coefficient ln(1/4)") {
    const Policy policy = Policy::uniform(kVocab4, PolicyKind::Tabular, 2);
    const GradEstimate est = estimate_jlb(policy, task, {3});
    CHECK(est.rewards[0] == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    // direct recomputation: reward * trace score + answer score
    const ParamVec expected = est.rewards[0] * grad_logprob(policy, task.prompt, {3}) +
                              grad_logprob(policy, {0, 3}, task.reference);
    CHECK((est.vector - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("saturated reference probability zeroes the trace coefficient") {
    Policy policy(kVocab4, PolicyKind::Tabular, 1);
    ParamVec params = ParamVec::Zero(policy.param_count());
    for (int ctx = 0; ctx < policy.layout().num_contexts; ++ctx) {
      params[policy.layout().coord_tabular(ctx, 1)] = 50.0;
    }
    policy.set_params(params);
    CHECK(std::abs(estimate_jlb(policy, task, {3}).rewards[0]) < 1e-10);
  }
  SUBCASE("randomized recomputation") {
    const Policy policy = Policy::random(kVocab4, PolicyKind::LinearFeatures, 2, 0.8, 7);
    for (const TokenSeq& trace : enumerate_traces(task.vocab, 2)) {
      const GradEstimate est = estimate_jlb(policy, task, trace);
      TokenSeq history = task.prompt;
      history.insert(history.end(), trace.begin(), trace.end());
      const ParamVec expected =
          logprob(policy, history, task.reference) * grad_logprob(policy, task.prompt, trace) +
          grad_logprob(policy, history, task.reference);
      CHECK((est.vector - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("reference-corrected estimator") {
  const TaskInstance task = simple_task();
  const Policy policy = Policy::random(kVocab4, PolicyKind::Tabular, 2, 0.8, 19);
  SUBCASE("identical policies reduce to the latent-bound estimator") {
    const GradEstimate latro = estimate_latro(policy, policy, task, {3});
    const GradEstimate jlb = estimate_jlb(policy, task, {3});
    CHECK((latro.vector - jlb.vector).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("randomized recomputation") {
    const Policy ref = Policy::random(kVocab4, PolicyKind::Tabular, 2, 0.8, 20);
    for (const TokenSeq& trace : enumerate_traces(task.vocab, 2)) {
      const GradEstimate est = estimate_latro(policy, ref, task, trace);
      TokenSeq history = task.prompt;
      history.insert(history.end(), trace.begin(), trace.end());
      const double coeff = logprob(policy, history, task.reference) -
                           (logprob(policy, task.prompt, trace) -
                            logprob(ref, task.prompt, trace));
      const ParamVec expected = coeff * grad_logprob(policy, task.prompt, trace) +
                                grad_logprob(policy, history, task.reference);
      CHECK((est.vector - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("leave-one-out advantages") {
  SUBCASE("worked example") {
    const std::vector<double> rewards = {0.8, 0.2, 0.4, 0.6};
    const std::vector<double> advantages = leave_one_out_advantages(rewards);
    CHECK(advantages[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(advantages[1] == doctest::Approx(-0.4).epsilon(1e-12));
    CHECK(advantages[2] == doctest::Approx(-0.4 / 3.0).epsilon(1e-12));
    CHECK(advantages[3] == doctest::Approx(0.4 / 3.0).epsilon(1e-12));
    CHECK(std::abs(std::accumulate(advantages.begin(), advantages.end(), 0.0)) < 1e-10);
  }
  SUBCASE("groups below two are rejected") {
    CHECK_THROWS_AS(leave_one_out_advantages({1.0}), std::invalid_argument);
  }
}

TEST_CASE("group estimator") {
  const TaskInstance task = simple_task();
  const Policy policy = Policy::random(kVocab4, PolicyKind::Tabular, 2, 0.8, 31);

  SUBCASE("rejects undersized groups") {
    const std::vector<Rollout> one = {rollout_for(policy, task, {3})};
    CHECK_THROWS_AS(estimate_verifree_group(policy, task, one), std::invalid_argument);
  }

  SUBCASE("equal rewards cancel the trace contribution") {
    // same trace four times -> identical rewards -> advantages exactly zero
    std::vector<Rollout> rollouts(4, rollout_for(policy, task, {3}));
    const GradEstimate est = estimate_verifree_group(policy, task, rollouts);
    for (double a : est.advantages) CHECK(a == 0.0);
    // what remains is the reward-weighted reference-answer term
    ParamVec expected = ParamVec::Zero(policy.param_count());
    const double confidence = reward_verifree(policy, task, {3}).value;
    expected += confidence * grad_logprob(policy, {0, 3}, task.reference);
    CHECK((est.vector - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("advantages sum to zero across random groups") {
    RolloutRng rng = make_rollout_rng(8, 0, 0, 0);
    std::vector<Rollout> rollouts;
    for (int g = 0; g < 8; ++g) {
      rollouts.push_back(sample_trace(policy, task.prompt, task.trace_budget, rng));
    }
    const GradEstimate est = estimate_verifree_group(policy, task, rollouts);
    CHECK(std::abs(std::accumulate(est.advantages.begin(), est.advantages.end(), 0.0)) < 1e-10);
    CHECK(est.rewards.size() == 8);
    CHECK(est.advantages.size() == 8);
  }

  SUBCASE("pair enumeration shows the baseline keeps the estimator unbiased") {
    const ParamVec oracle = exact_gradient(policy, task, ObjectiveMode::Verifier);
    const auto traces = enumerate_traces(task.vocab, task.trace_budget);
    std::vector<double> trace_probs;
    for (const TokenSeq& trace : traces) {
      trace_probs.push_back(std::exp(logprob(policy, task.prompt, trace)));
    }
    ParamVec mean = ParamVec::Zero(policy.param_count());
    for (std::size_t a = 0; a < traces.size(); ++a) {
      for (std::size_t b = 0; b < traces.size(); ++b) {
        const std::vector<Rollout> group = {rollout_for(policy, task, traces[a]),
                                            rollout_for(policy, task, traces[b])};
        mean += trace_probs[a] * trace_probs[b] *
                estimate_verifree_group(policy, task, group).vector;
      }
    }
    CHECK((mean - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("off-policy estimator") {
  const TaskInstance task = simple_task();
  const Policy policy = Policy::random(kVocab4, PolicyKind::Tabular, 2, 0.8, 47);
  RolloutRng rng = make_rollout_rng(12, 0, 0, 0);
  std::vector<Rollout> rollouts;
  for (int g = 0; g < 6; ++g) {
    rollouts.push_back(sample_trace(policy, task.prompt, task.trace_budget, rng));
  }

  SUBCASE("on-policy reduction") {
    const GradEstimate clipped = estimate_verifree_ppo(policy, policy, task, rollouts, 0.2);
    const GradEstimate plain = estimate_verifree_group(policy, task, rollouts);
    CHECK(clipped.clip_fraction == 0.0);
    CHECK((clipped.vector - plain.vector).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("rollouts without log-probabilities are rejected") {
    std::vector<Rollout> broken = rollouts;
    broken[0].per_token_logprob.clear();
    CHECK_THROWS_AS(estimate_verifree_ppo(policy, policy, task, broken, 0.2),
                    std::invalid_argument);
  }

  SUBCASE("a ratio beyond the clip boundary silences that token") {
    // move one trace token's logit so its ratio exceeds 1.2 with positive weight
    const TokenSeq probe_trace = {kVocab4.answer_open_id};
    std::vector<Rollout> group = {rollout_for(policy, task, probe_trace),
                                  rollout_for(policy, task, {0, 1})};
    Policy updated = policy;
    ParamVec params = updated.params();
    const int ctx = updated.layout().context_id(std::span<const TokenId>(task.prompt));
    params[updated.layout().coord_tabular(ctx, kVocab4.answer_open_id)] += 0.9;
    updated.set_params(params);

    const double ratio =
        std::exp(updated.next_logprobs(task.prompt)[kVocab4.answer_open_id] -
                 policy.next_logprobs(task.prompt)[kVocab4.answer_open_id]);
    REQUIRE(ratio > 1.5);

    const GradEstimate est = estimate_verifree_ppo(updated, policy, task, group, 0.2);
    const auto advantages = est.advantages;
    if (advantages[0] > 0.0) {
      CHECK(est.clip_fraction > 0.0);
      // the clipped trace token's context must receive no trace-term gradient;
      // compare against a run with a huge clip window where it does
      const GradEstimate open_window = estimate_verifree_ppo(updated, policy, task, group, 1e9);
      const int coord =
          updated.layout().coord_tabular(ctx, kVocab4.answer_open_id);
      CHECK(est.vector[coord] != doctest::Approx(open_window.vector[coord]).epsilon(1e-9));
    }
  }

  SUBCASE("continuity under a small parameter perturbation") {
    Policy nudged = policy;
    ParamVec params = nudged.params();
    params[3] += 1e-4 / std::sqrt(2.0);
    params[11] -= 1e-4 / std::sqrt(2.0);
    nudged.set_params(params);
    const GradEstimate off_policy = estimate_verifree_ppo(nudged, policy, task, rollouts, 0.2);
    const GradEstimate on_policy = estimate_verifree_group(nudged, task, rollouts);
    const double scale = std::max(on_policy.vector.norm(), 1e-12);
    CHECK((off_policy.vector - on_policy.vector).norm() / scale < 1e-3);
  }
}
