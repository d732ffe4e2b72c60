#include <doctest.h>

#include <cmath>

#include "verifree/errors.hpp"
#include "verifree/oracle.hpp"
#include "verifree/trainer.hpp"

using namespace verifree;

namespace {

TaskFamily small_family() {
  TaskFamily family;
  family.name = "lookup";
  family.seed = 11;
  family.instance_count = 4;
  family.size = 2;
  family.vocab_size = 4;
  family.trace_budget = 2;
  return family;
}

TrainConfig small_config(TrainerArm arm = TrainerArm::VeriFreeRloo) {
  TrainConfig config;
  config.arm = arm;
  config.group_size = 4;
  config.prompts_per_step = 4;
  config.steps = 5;
  config.learning_rate = 0.05;
  config.seed = 3;
  config.eval_every = 1;
  config.holdout_instances = 2;
  return config;
}

Policy small_policy() {
  return Policy::uniform(Vocab::lab(4), PolicyKind::Tabular, 2);
}

}  // namespace

TEST_CASE("zero learning rate leaves the policy untouched") {
  TrainConfig config = small_config();
  config.learning_rate = 0.0;
  config.steps = 4;
  const Policy initial = small_policy();
  const TrainResult result = train(config, small_family(), initial);
  CHECK(result.policy.params() == initial.params());
  for (std::size_t i = 1; i < result.metrics.size(); ++i) {
    CHECK(result.metrics[i].confidence_mean ==
          doctest::Approx(result.metrics[0].confidence_mean).epsilon(1e-12));
  }
}

TEST_CASE("identical config and seed give bitwise-identical metric streams") {
  const TrainConfig config = small_config();
  const TrainResult a = train(config, small_family(), small_policy());
  const TrainResult b = train(config, small_family(), small_policy());
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].reward_mean == b.metrics[i].reward_mean);
    CHECK(a.metrics[i].confidence_mean == b.metrics[i].confidence_mean);
    CHECK(a.metrics[i].grad_norm == b.metrics[i].grad_norm);
    CHECK(a.metrics[i].exact_objective == b.metrics[i].exact_objective);
  }
  CHECK(a.policy.params() == b.policy.params());
}

TEST_CASE("worker count does not change the result") {
  TrainConfig threaded = small_config();
  threaded.workers = 4;
  const TrainResult a = train(small_config(), small_family(), small_policy());
  const TrainResult b = train(threaded, small_family(), small_policy());
  CHECK(a.policy.params() == b.policy.params());
}

TEST_CASE("sgd step is collinear with the estimator output") {
  TrainConfig config = small_config();
  config.optimizer = OptimizerKind::Sgd;
  config.steps = 1;
  config.learning_rate = 1e-6;
  const Policy initial = small_policy();
  const TrainResult result = train(config, small_family(), initial);
  const ParamVec delta = result.policy.params() - initial.params();
  const double norm = delta.norm();
  REQUIRE(norm > 0.0);
  // delta = lr * grad exactly in sgd mode, so delta/lr has the metric's norm
  CHECK(norm / config.learning_rate ==
        doctest::Approx(result.metrics[0].grad_norm).epsilon(1e-9));
}

TEST_CASE("evaluation on a perfect policy") {
  const Vocab vocab = Vocab::lab(4);
  Policy policy(vocab, PolicyKind::Tabular, 2);
  // saturate: every context emits OPEN, then the answer context emits token 1
  ParamVec params = ParamVec::Zero(policy.param_count());
  for (int ctx = 0; ctx < policy.layout().num_contexts; ++ctx) {
    params[policy.layout().coord_tabular(ctx, vocab.answer_open_id)] = 60.0;
  }
  TaskInstance task;
  task.vocab = vocab;
  task.prompt = {0};
  task.reference = {1};
  task.trace_budget = 2;
  task.id = "eval";
  TokenSeq answer_history = task.prompt;
  answer_history.push_back(vocab.answer_open_id);
  const int answer_ctx = policy.layout().context_id(answer_history);
  params[policy.layout().coord_tabular(answer_ctx, 1)] = 120.0;
  policy.set_params(params);

  const EvalResult eval = eval_confidence_accuracy(policy, {task}, 5);
  CHECK(eval.accuracy == 1.0);
  CHECK(eval.mean_confidence == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("evaluation under the uniform policy") {
  const Vocab vocab = Vocab::lab(4);
  const Policy policy = Policy::uniform(vocab, PolicyKind::Tabular, 2);
  std::vector<TaskInstance> instances;
  for (TokenId reference = 0; reference < 4; ++reference) {
    TaskInstance task;
    task.vocab = vocab;
    task.prompt = {0};
    task.reference = {reference};
    task.trace_budget = 2;
    task.id = "eval-uniform";
    instances.push_back(task);
  }
  const EvalResult eval = eval_confidence_accuracy(policy, instances, 5);
  // greedy decoding breaks the four-way tie toward token 0, hitting exactly
  // the quarter of instances whose reference is token 0
  CHECK(eval.accuracy == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(eval.mean_confidence == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("divergence guard aborts with the offending step") {
  TrainConfig config = small_config();
  config.learning_rate = 1e308;  // adam-scaled steps overflow the parameters quickly
  config.steps = 10;
  CHECK_THROWS_AS(train(config, small_family(), small_policy()), TrainingDiverged);
}

TEST_CASE("reuse epochs require the off-policy arm") {
  TrainConfig config = small_config();
  config.reuse_epochs = 2;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.arm = TrainerArm::VeriFreePpo;
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("every arm runs and the streams stay labeled") {
  for (TrainerArm arm :
       {TrainerArm::VeriFreeRloo, TrainerArm::VeriFreeNoRloo, TrainerArm::ShapedVerifier,
        TrainerArm::Jlb, TrainerArm::Latro, TrainerArm::VeriFreePpo}) {
    TrainConfig config = small_config(arm);
    config.steps = 3;
    if (arm == TrainerArm::VeriFreePpo) config.reuse_epochs = 2;
    const TrainResult result = train(config, small_family(), small_policy());
    REQUIRE(result.metrics.size() == 3);
    const std::string expected_kind = arm == TrainerArm::ShapedVerifier ? "shaped-verifier"
                                      : arm == TrainerArm::Jlb          ? "jlb"
                                      : arm == TrainerArm::Latro        ? "latro"
                                                                        : "verifree";
    CHECK(result.metrics[0].reward_kind == expected_kind);
    CHECK(std::isfinite(result.metrics.back().grad_norm));
    if (arm != TrainerArm::VeriFreePpo) CHECK(result.metrics.back().clip_fraction == 0.0);
  }
}

TEST_CASE("step-0 rollouts coincide across arms") {
  // same seed, same initial policy: the step-0 reward statistics of the two
  // confidence-reward arms must match exactly
  const TrainResult rloo =
      train(small_config(TrainerArm::VeriFreeRloo), small_family(), small_policy());
  const TrainResult no_rloo =
      train(small_config(TrainerArm::VeriFreeNoRloo), small_family(), small_policy());
  CHECK(rloo.metrics[0].reward_mean == no_rloo.metrics[0].reward_mean);
  CHECK(rloo.metrics[0].trace_length_mean == no_rloo.metrics[0].trace_length_mean);
}

TEST_CASE("compare assembles aligned arm results") {
  TrainConfig base = small_config();
  base.steps = 3;
  const auto rows = compare_estimators(base, small_family(), small_policy(),
                                       {TrainerArm::VeriFreeRloo, TrainerArm::Jlb}, {1, 2}, 0.8);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].arm == "verifree-rloo");
  CHECK(rows[0].seed == 1);
  CHECK(rows[3].arm == "jlb");
  CHECK(rows[3].seed == 2);
  for (const auto& row : rows) CHECK(row.metrics.size() == 3);
}

TEST_CASE("equivalence scoring requires the multi-answer family") {
  TrainConfig config = small_config();
  config.scoring = AnswerScoring::EquivalenceClass;
  CHECK_THROWS_AS(train(config, small_family(), small_policy()), ConfigError);
}
