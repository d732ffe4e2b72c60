#include "verifree/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "verifree/errors.hpp"
#include "verifree/oracle.hpp"
#include "verifree/rewards.hpp"
#include "verifree/rng.hpp"

namespace verifree {

TrainerArm trainer_arm_from_string(const std::string& name) {
  if (name == "verifree-rloo") return TrainerArm::VeriFreeRloo;
  if (name == "verifree-no-rloo") return TrainerArm::VeriFreeNoRloo;
  if (name == "shaped-verifier") return TrainerArm::ShapedVerifier;
  if (name == "jlb") return TrainerArm::Jlb;
  if (name == "latro") return TrainerArm::Latro;
  if (name == "verifree-ppo") return TrainerArm::VeriFreePpo;
  throw ConfigError("estimator.kind: unknown value \"" + name +
                    "\" (known: verifree-rloo, verifree-no-rloo, shaped-verifier, jlb, latro, "
                    "verifree-ppo)");
}

std::string to_string(TrainerArm arm) {
  switch (arm) {
    case TrainerArm::VeriFreeRloo: return "verifree-rloo";
    case TrainerArm::VeriFreeNoRloo: return "verifree-no-rloo";
    case TrainerArm::ShapedVerifier: return "shaped-verifier";
    case TrainerArm::Jlb: return "jlb";
    case TrainerArm::Latro: return "latro";
    case TrainerArm::VeriFreePpo: return "verifree-ppo";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("rollout.group_size must be >= 2 for leave-one-out arms");
  if (prompts_per_step < 1) throw ConfigError("trainer.prompts_per_step must be >= 1");
  if (steps < 0) throw ConfigError("trainer.steps must be >= 0");
  if (!(learning_rate >= 0.0)) throw ConfigError("trainer.lr must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("policy.temperature must be > 0");
  if (eval_every < 0) throw ConfigError("trainer.eval_every must be >= 0");
  if (reuse_epochs < 1) throw ConfigError("trainer.reuse_epochs must be >= 1");
  if (reuse_epochs > 1 && arm != TrainerArm::VeriFreePpo) {
    throw ConfigError("trainer.reuse_epochs > 1 requires estimator.kind = verifree-ppo");
  }
  if (!(clip_eps > 0.0)) throw ConfigError("estimator.clip_eps must be > 0");
  if (holdout_instances < 0) throw ConfigError("task.holdout must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

namespace {

struct AdamState {
  ParamVec m;
  ParamVec v;
  int t = 0;
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  explicit AdamState(int dim) : m(ParamVec::Zero(dim)), v(ParamVec::Zero(dim)) {}

  ParamVec ascent_step(const ParamVec& grad, double lr) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double m_scale = 1.0 / (1.0 - std::pow(beta1, t));
    const double v_scale = 1.0 / (1.0 - std::pow(beta2, t));
    return lr * (m_scale * m.array() / ((v_scale * v.array()).sqrt() + eps)).matrix();
  }
};

struct PromptBatch {
  const TaskInstance* task;
  std::vector<Rollout> rollouts;
  std::vector<ResponseSample> responses;  // shaped-verifier arm only
};

double sample_variance(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(n - 1);
}

void run_parallel(int jobs, int workers, const std::function<void(int)>& body) {
  if (workers <= 1 || jobs <= 1) {
    for (int i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  const int threads = std::min(workers, jobs);
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

double family_exact_objective(const Policy& policy, const TaskFamily& family,
                              int holdout_instances) {
  const int train_count = std::max(1, family.instance_count - holdout_instances);
  double total = 0.0;
  for (int i = 0; i < train_count; ++i) {
    total += exact_objective(policy, make_task(family, i), ObjectiveMode::Verifier);
  }
  return total / train_count;
}

EvalResult eval_confidence_accuracy(const Policy& policy,
                                    const std::vector<TaskInstance>& instances,
                                    std::uint64_t seed) {
  EvalResult result;
  if (instances.empty()) return result;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const TaskInstance& task = instances[i];
    RolloutRng rng = make_rollout_rng(seed, 0xe7a1ull, i, 0);
    const Rollout rollout = sample_trace(policy, task.prompt, task.trace_budget, rng);
    TokenSeq history = task.prompt;
    history.insert(history.end(), rollout.trace.begin(), rollout.trace.end());
    const TokenSeq decoded = greedy_answer(policy, history, task.answer_length());
    result.accuracy += reward_verifier(decoded, task).value;
    result.mean_confidence += answer_probability(policy, task, rollout.trace, task.reference);
  }
  result.accuracy /= static_cast<double>(instances.size());
  result.mean_confidence /= static_cast<double>(instances.size());
  return result;
}

TrainResult train(const TrainConfig& config, const TaskFamily& family, Policy policy) {
  config.validate();
  if (config.scoring == AnswerScoring::EquivalenceClass && family.name != "multi-answer") {
    throw ConfigError("estimator.reward = verifree-equiv requires the multi-answer family");
  }
  policy.set_temperature(config.temperature);

  const int train_count = family.instance_count - config.holdout_instances;
  if (train_count < 1) {
    throw ConfigError("task.holdout leaves no training instances");
  }
  std::vector<TaskInstance> train_tasks;
  for (int i = 0; i < train_count; ++i) train_tasks.push_back(make_task(family, i));
  std::vector<TaskInstance> holdout_tasks;
  for (int i = train_count; i < family.instance_count; ++i) {
    holdout_tasks.push_back(make_task(family, i));
  }

  const Policy reference_policy = policy;  // frozen at step 0, latro reward only
  AdamState adam(policy.param_count());

  TrainResult result{policy, {}};
  result.metrics.reserve(static_cast<size_t>(config.steps));

  for (int step = 0; step < config.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    Policy& current = result.policy;
    const Policy sampling_policy = current;  // frozen for this step's rollouts

    // Sampling phase: one private random stream per (prompt slot, group slot)
    // so results do not depend on worker count.
    std::vector<PromptBatch> batches(static_cast<size_t>(config.prompts_per_step));
    const bool wants_answers = config.arm == TrainerArm::ShapedVerifier;
    run_parallel(config.prompts_per_step, config.workers, [&](int j) {
      PromptBatch& batch = batches[static_cast<size_t>(j)];
      const int instance =
          (step * config.prompts_per_step + j) % train_count;
      batch.task = &train_tasks[static_cast<size_t>(instance)];
      batch.rollouts.reserve(static_cast<size_t>(config.group_size));
      for (int g = 0; g < config.group_size; ++g) {
        RolloutRng rng = make_rollout_rng(config.seed, static_cast<std::uint64_t>(step),
                                          static_cast<std::uint64_t>(j),
                                          static_cast<std::uint64_t>(g));
        Rollout rollout =
            sample_trace(sampling_policy, batch.task->prompt, batch.task->trace_budget, rng);
        if (wants_answers) {
          ResponseSample sample;
          TokenSeq history = batch.task->prompt;
          history.insert(history.end(), rollout.trace.begin(), rollout.trace.end());
          sample.answer =
              sample_answer(sampling_policy, history, batch.task->answer_length(), rng);
          sample.format_ok = rollout.boundary_terminated;
          sample.rollout = rollout;
          batch.responses.push_back(std::move(sample));
        }
        batch.rollouts.push_back(std::move(rollout));
      }
    });

    // Diagnostics accumulated over the whole step.
    StepMetrics metrics;
    metrics.step = step;
    double reward_sum = 0.0;
    double confidence_sum = 0.0;
    double length_sum = 0.0;
    double group_var_sum = 0.0;
    int rollout_count = 0;

    auto update_once = [&](const ParamVec& grad, double clip_fraction) {
      metrics.grad_norm = grad.norm();
      metrics.clip_fraction = clip_fraction;
      const ParamVec delta = config.optimizer == OptimizerKind::AdamLike
                                 ? adam.ascent_step(grad, config.learning_rate)
                                 : ParamVec(config.learning_rate * grad);
      ParamVec params = current.params() + delta;
      if (!params.allFinite()) {
        throw TrainingDiverged(step, "non-finite parameter after " + to_string(config.arm) +
                                         " update (|grad| = " + std::to_string(metrics.grad_norm) +
                                         ", lr = " + std::to_string(config.learning_rate) + ")");
      }
      current.set_params(std::move(params));
    };

    auto grad_for_epoch = [&](const Policy& old_policy, bool record_diagnostics) {
      ParamVec grad = ParamVec::Zero(current.param_count());
      double clip_sum = 0.0;
      for (PromptBatch& batch : batches) {
        GradEstimate est;
        switch (config.arm) {
          case TrainerArm::VeriFreeRloo:
            est = estimate_verifree_group(current, *batch.task, batch.rollouts,
                                          {true, config.scoring});
            break;
          case TrainerArm::VeriFreeNoRloo:
            est = estimate_verifree_group(current, *batch.task, batch.rollouts,
                                          {false, config.scoring});
            break;
          case TrainerArm::ShapedVerifier:
            est = estimate_verifier_group(current, *batch.task, batch.responses, /*shaped=*/true);
            break;
          case TrainerArm::Jlb: {
            est.vector = ParamVec::Zero(current.param_count());
            for (const Rollout& rollout : batch.rollouts) {
              const GradEstimate one = estimate_jlb(current, *batch.task, rollout.trace);
              est.vector += one.vector / config.group_size;
              est.rewards.push_back(one.rewards[0]);
            }
            break;
          }
          case TrainerArm::Latro: {
            est.vector = ParamVec::Zero(current.param_count());
            for (const Rollout& rollout : batch.rollouts) {
              const GradEstimate one =
                  estimate_latro(current, reference_policy, *batch.task, rollout.trace);
              est.vector += one.vector / config.group_size;
              est.rewards.push_back(one.rewards[0]);
            }
            break;
          }
          case TrainerArm::VeriFreePpo:
            est = estimate_verifree_ppo(current, old_policy, *batch.task, batch.rollouts,
                                        config.clip_eps, {true, config.scoring});
            break;
        }
        grad += est.vector / config.prompts_per_step;
        clip_sum += est.clip_fraction;
        if (record_diagnostics) {
          for (double r : est.rewards) reward_sum += r;
          group_var_sum += sample_variance(est.rewards);
          for (const Rollout& rollout : batch.rollouts) {
            confidence_sum +=
                answer_probability(current, *batch.task, rollout.trace, batch.task->reference);
            length_sum += static_cast<double>(rollout.trace.size());
            ++rollout_count;
          }
        }
      }
      return std::make_pair(grad, clip_sum / config.prompts_per_step);
    };

    if (config.arm == TrainerArm::VeriFreePpo) {
      const Policy old_policy = current;
      double clip_mean = 0.0;
      for (int epoch = 0; epoch < config.reuse_epochs; ++epoch) {
        const auto [grad, clip] = grad_for_epoch(old_policy, epoch == 0);
        clip_mean += clip / config.reuse_epochs;
        update_once(grad, clip);
      }
      metrics.clip_fraction = clip_mean;
    } else {
      const auto [grad, clip] = grad_for_epoch(current, true);
      update_once(grad, clip);
    }

    const int scored = std::max(1, rollout_count);
    metrics.reward_kind = config.arm == TrainerArm::ShapedVerifier
                              ? to_string(RewardKind::ShapedVerifier)
                              : (config.arm == TrainerArm::Jlb    ? to_string(RewardKind::Jlb)
                                 : config.arm == TrainerArm::Latro ? to_string(RewardKind::Latro)
                                 : config.scoring == AnswerScoring::EquivalenceClass
                                     ? to_string(RewardKind::VeriFreeEquiv)
                                     : to_string(RewardKind::VeriFree));
    metrics.reward_mean = reward_sum / scored;
    metrics.confidence_mean = confidence_sum / scored;
    metrics.trace_length_mean = length_sum / scored;
    metrics.group_reward_variance = group_var_sum / config.prompts_per_step;

    if (config.eval_every > 0 &&
        (step % config.eval_every == 0 || step + 1 == config.steps)) {
      metrics.exact_objective = family_exact_objective(current, family, config.holdout_instances);
      if (!holdout_tasks.empty()) {
        const EvalResult eval = eval_confidence_accuracy(
            current, holdout_tasks, derive_stream_id(config.seed, 0xea17ull, static_cast<std::uint64_t>(step)));
        metrics.holdout_accuracy = eval.accuracy;
        metrics.holdout_confidence = eval.mean_confidence;
      }
    }
    metrics.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(std::move(metrics));
  }
  return result;
}

std::vector<CompareArmResult> compare_estimators(const TrainConfig& base,
                                                 const TaskFamily& family,
                                                 const Policy& initial_policy,
                                                 const std::vector<TrainerArm>& arms,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 double objective_threshold) {
  std::vector<CompareArmResult> results;
  for (TrainerArm arm : arms) {
    for (std::uint64_t seed : seeds) {
      TrainConfig config = base;
      config.arm = arm;
      config.seed = seed;
      if (arm == TrainerArm::VeriFreePpo && config.reuse_epochs < 2) config.reuse_epochs = 2;
      if (arm != TrainerArm::VeriFreePpo) config.reuse_epochs = 1;
      TrainResult run = train(config, family, initial_policy);

      CompareArmResult row;
      row.arm = to_string(arm);
      row.seed = seed;
      row.final_objective = family_exact_objective(run.policy, family, config.holdout_instances);
      for (const StepMetrics& m : run.metrics) {
        if (m.exact_objective && *m.exact_objective >= objective_threshold) {
          row.steps_to_threshold = m.step;
          break;
        }
      }
      row.metrics = std::move(run.metrics);
      results.push_back(std::move(row));
    }
  }
  return results;
}

}  // namespace verifree
