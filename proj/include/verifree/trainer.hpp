#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "verifree/estimators.hpp"
#include "verifree/policy.hpp"
#include "verifree/seq.hpp"

namespace verifree {

/// Training arms. "verifree-no-rloo" is the no-baseline ablation (A_i = R_i);
/// "shaped-verifier" is the verifier baseline with format and length shaping.
enum class TrainerArm {
  VeriFreeRloo,
  VeriFreeNoRloo,
  ShapedVerifier,
  Jlb,
  Latro,
  VeriFreePpo,
};

TrainerArm trainer_arm_from_string(const std::string& name);
std::string to_string(TrainerArm arm);

enum class OptimizerKind { Sgd, AdamLike };

struct TrainConfig {
  TrainerArm arm = TrainerArm::VeriFreeRloo;
  AnswerScoring scoring = AnswerScoring::Reference;
  int group_size = 8;
  int prompts_per_step = 16;
  int steps = 600;
  double learning_rate = 0.05;
  double temperature = 1.0;
  std::uint64_t seed = 42;
  int eval_every = 10;            // exact-objective / held-out eval cadence; 0 disables
  OptimizerKind optimizer = OptimizerKind::AdamLike;
  int reuse_epochs = 1;           // >1 only meaningful for the ppo arm
  double clip_eps = 0.2;
  int holdout_instances = 4;      // trailing instances reserved for evaluation
  int workers = 1;

  void validate() const;
};

/// Per-step diagnostics. Reward streams are labeled by kind because shaped
/// and confidence rewards live on different scales. wall_time_ms is kept in
/// memory only; the JSONL writer drops it so equal-seed runs emit identical
/// bytes.
struct StepMetrics {
  int step = 0;
  std::string reward_kind;
  double reward_mean = 0.0;
  double confidence_mean = 0.0;
  double trace_length_mean = 0.0;
  double group_reward_variance = 0.0;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  std::optional<double> exact_objective;
  std::optional<double> holdout_accuracy;
  std::optional<double> holdout_confidence;
  double wall_time_ms = 0.0;
};

struct TrainResult {
  Policy policy;
  std::vector<StepMetrics> metrics;
};

/// Group sampling, estimator invocation, one ascent step per sampling step
/// (reuse_epochs steps for the ppo arm). Deterministic given the config.
TrainResult train(const TrainConfig& config, const TaskFamily& family, Policy policy);

struct EvalResult {
  double accuracy = 0.0;
  double mean_confidence = 0.0;
};

/// Accuracy of greedy answer decoding after a sampled trace, plus the mean
/// confidence assigned to the reference answer. Deterministic given seed.
EvalResult eval_confidence_accuracy(const Policy& policy,
                                    const std::vector<TaskInstance>& instances,
                                    std::uint64_t seed);

struct CompareArmResult {
  std::string arm;
  std::uint64_t seed = 0;
  double final_objective = 0.0;
  std::optional<int> steps_to_threshold;
  std::vector<StepMetrics> metrics;
};

/// Runs the listed arms on identical seeds and tasks from one initial policy.
/// Step-0 rollouts coincide across arms by construction of the per-rollout
/// random streams.
std::vector<CompareArmResult> compare_estimators(const TrainConfig& base,
                                                 const TaskFamily& family,
                                                 const Policy& initial_policy,
                                                 const std::vector<TrainerArm>& arms,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 double objective_threshold);

/// Mean verifier-mode exact objective over the family's training instances.
double family_exact_objective(const Policy& policy, const TaskFamily& family,
                              int holdout_instances);

}  // namespace verifree
