#include <doctest.h>

#include "verifree/config.hpp"
#include "verifree/errors.hpp"

using namespace verifree;

namespace {

const char* kMinimalConfig =
    "task.family = lookup\n"
    "estimator.kind = verifree-rloo\n";

}  // namespace

TEST_CASE("parses section.key = value lines with comments") {
  const ExperimentConfig config = ExperimentConfig::from_text(
      "# experiment\n"
      "task.family = lookup   # inline comment\n"
      "estimator.kind = verifree-rloo\n"
      "trainer.lr = 0.1\n"
      "\n");
  CHECK(config.get("task.family") == "lookup");
  CHECK(config.get_double("trainer.lr") == 0.1);
  // defaults fill everything else
  CHECK(config.get_int("rollout.group_size") == 8);
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_text("task.familly = lookup\n"),
                       doctest::Contains("task.familly"), ConfigError);
}

TEST_CASE("missing required keys are reported by name") {
  const ExperimentConfig config = ExperimentConfig::from_text("task.family = lookup\n");
  CHECK_THROWS_WITH_AS(config.train_config(), doctest::Contains("estimator.kind"), ConfigError);
}

TEST_CASE("type errors name the key") {
  const ExperimentConfig config = ExperimentConfig::from_text(
      "task.family = lookup\n"
      "estimator.kind = verifree-rloo\n"
      "trainer.steps = soon\n");
  CHECK_THROWS_WITH_AS(config.train_config(), doctest::Contains("trainer.steps"), ConfigError);
}

TEST_CASE("overrides apply after the file") {
  ExperimentConfig config = ExperimentConfig::from_text(kMinimalConfig);
  config.apply_override("trainer.steps=42");
  CHECK(config.get_int("trainer.steps") == 42);
  CHECK_THROWS_AS(config.apply_override("no-equals-sign"), ConfigError);
  CHECK_THROWS_WITH_AS(config.apply_override("bogus.key=1"), doctest::Contains("bogus.key"),
                       ConfigError);
}

TEST_CASE("hash is stable and assignment-order independent") {
  ExperimentConfig a = ExperimentConfig::from_text(kMinimalConfig);
  ExperimentConfig b = ExperimentConfig::from_text(
      "estimator.kind = verifree-rloo\n"
      "task.family = lookup\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.apply_override("trainer.steps=13");
  CHECK(a.hash() != b.hash());
}

TEST_CASE("materializes typed sub-configs") {
  ExperimentConfig config = ExperimentConfig::from_text(kMinimalConfig);
  const TaskFamily family = config.task_family();
  CHECK(family.name == "lookup");
  CHECK(family.instance_count == 8);

  const TrainConfig train = config.train_config();
  CHECK(train.arm == TrainerArm::VeriFreeRloo);
  CHECK(train.group_size == 8);
  CHECK(train.prompts_per_step == 16);
  CHECK(train.temperature == 1.0);

  const Policy policy = config.initial_policy();
  CHECK(policy.vocab().size == 6);
  CHECK(policy.layout().kind == PolicyKind::Tabular);

  CHECK(config.compare_arms().size() == 6);
  CHECK(config.compare_seeds() == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
}

TEST_CASE("estimator reward selection") {
  ExperimentConfig config = ExperimentConfig::from_text(
      "task.family = multi-answer\n"
      "estimator.kind = verifree-rloo\n"
      "estimator.reward = verifree-equiv\n");
  CHECK(config.train_config().scoring == AnswerScoring::EquivalenceClass);
  config.apply_override("estimator.reward=confidence");
  CHECK_THROWS_WITH_AS(config.train_config(), doctest::Contains("estimator.reward"), ConfigError);
}
