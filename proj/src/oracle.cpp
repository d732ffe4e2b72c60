#include "verifree/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "verifree/errors.hpp"

namespace verifree {

namespace {

struct EnumeratedTraces {
  std::vector<TokenSeq> traces;
  std::vector<double> logprobs;
};

EnumeratedTraces enumerate_with_mass(const Policy& policy, const TaskInstance& task,
                                     std::size_t cap) {
  EnumeratedTraces out;
  out.traces = enumerate_traces(task.vocab, task.trace_budget, cap);
  out.logprobs.reserve(out.traces.size());
  double mass = 0.0;
  for (const TokenSeq& trace : out.traces) {
    const double lp = logprob(policy, task.prompt, trace);
    out.logprobs.push_back(lp);
    mass += std::exp(lp);
  }
  if (std::abs(mass - 1.0) > 1e-12) {
    throw NumericalCheckError("probability closure violated: enumerated trace mass " +
                              std::to_string(mass));
  }
  return out;
}

/// Walks every answer of the task's fixed length, calling
/// visit(answer, pi(answer | history)).
void for_each_answer(const Policy& policy, const TokenSeq& history, int length,
                     const std::function<void(const TokenSeq&, double)>& visit) {
  TokenSeq answer;
  TokenSeq ctx = history;
  auto walk = [&](auto&& self, double logp) -> void {
    if (static_cast<int>(answer.size()) == length) {
      visit(answer, std::exp(logp));
      return;
    }
    const Eigen::VectorXd lp = policy.next_logprobs(ctx);
    for (TokenId t = 0; t < static_cast<TokenId>(lp.size()); ++t) {
      answer.push_back(t);
      ctx.push_back(t);
      self(self, logp + lp[t]);
      ctx.pop_back();
      answer.pop_back();
    }
  };
  walk(walk, 0.0);
}

TokenSeq concat(const TokenSeq& a, const TokenSeq& b) {
  TokenSeq out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

double exact_objective(const Policy& policy, const TaskInstance& task, ObjectiveMode mode,
                       const OracleOptions& options) {
  task.validate();
  const EnumeratedTraces space = enumerate_with_mass(policy, task, options.enumeration_cap);
  double total = 0.0;
  for (std::size_t i = 0; i < space.traces.size(); ++i) {
    const double trace_prob = std::exp(space.logprobs[i]);
    if (mode == ObjectiveMode::VeriFree) {
      total += trace_prob * answer_probability(policy, task, space.traces[i], task.reference);
    } else {
      const TokenSeq history = concat(task.prompt, space.traces[i]);
      double expected = 0.0;
      for_each_answer(policy, history, task.answer_length(),
                      [&](const TokenSeq& answer, double prob) {
                        expected += prob * reward_verifier(answer, task).value;
                      });
      total += trace_prob * expected;
    }
  }
  return total;
}

ParamVec exact_gradient(const Policy& policy, const TaskInstance& task, ObjectiveMode mode,
                        const OracleOptions& options) {
  task.validate();
  const EnumeratedTraces space = enumerate_with_mass(policy, task, options.enumeration_cap);
  ParamVec total = ParamVec::Zero(policy.param_count());
  for (std::size_t i = 0; i < space.traces.size(); ++i) {
    const TokenSeq& trace = space.traces[i];
    const double trace_prob = std::exp(space.logprobs[i]);
    if (mode == ObjectiveMode::VeriFree) {
      total += trace_prob * estimate_verifree(policy, task, trace).vector;
    } else {
      const TokenSeq history = concat(task.prompt, trace);
      for_each_answer(policy, history, task.answer_length(),
                      [&](const TokenSeq& answer, double prob) {
                        if (reward_verifier(answer, task).value != 0.0) {
                          total += trace_prob * prob *
                                   estimate_verifier(policy, task, trace, answer).vector;
                        }
                      });
    }
  }
  return total;
}

VarianceReport exact_estimator_covariance(const Policy& policy, const TaskInstance& task,
                                          const CovarianceOptions& options) {
  task.validate();
  const EnumeratedTraces space =
      enumerate_with_mass(policy, task, options.enumeration_cap);
  const int dim = policy.param_count();

  VarianceReport report;
  report.task_id = task.id;

  ParamVec mean_verifier = ParamVec::Zero(dim);
  ParamVec mean_verifree = ParamVec::Zero(dim);
  ParamVec second_verifier = ParamVec::Zero(dim);  // per-coordinate E[g^2]
  ParamVec second_verifree = ParamVec::Zero(dim);
  double inner = 0.0;

  for (std::size_t i = 0; i < space.traces.size(); ++i) {
    const TokenSeq& trace = space.traces[i];
    const double trace_prob = std::exp(space.logprobs[i]);
    const TokenSeq history = concat(task.prompt, trace);

    const ParamVec verifree_est = estimate_verifree(policy, task, trace).vector;
    mean_verifree += trace_prob * verifree_est;
    second_verifree += trace_prob * verifree_est.cwiseProduct(verifree_est);

    // Conditional moments of the verifier estimate over the answer draw.
    ParamVec cond_mean = ParamVec::Zero(dim);
    double cond_second_tr = 0.0;
    for_each_answer(policy, history, task.answer_length(),
                    [&](const TokenSeq& answer, double prob) {
                      if (reward_verifier(answer, task).value == 0.0) return;
                      const ParamVec est = estimate_verifier(policy, task, trace, answer).vector;
                      mean_verifier += trace_prob * prob * est;
                      second_verifier += trace_prob * prob * est.cwiseProduct(est);
                      cond_mean += prob * est;
                      cond_second_tr += prob * est.squaredNorm();
                    });
    inner += trace_prob * (cond_second_tr - cond_mean.squaredNorm());
  }

  const ParamVec var_verifier = second_verifier - mean_verifier.cwiseProduct(mean_verifier);
  const ParamVec var_verifree = second_verifree - mean_verifree.cwiseProduct(mean_verifree);
  report.var_verifier_trace = var_verifier.sum();
  report.var_verifree_trace = var_verifree.sum();
  report.decomposition_inner = inner;
  if (options.per_coordinate) {
    report.per_coordinate_verifier = var_verifier;
    report.per_coordinate_verifree = var_verifree;
  }
  return report;
}

ParamVec conditional_verifier_expectation(const Policy& policy, const TaskInstance& task,
                                          const TokenSeq& trace) {
  ParamVec expectation = ParamVec::Zero(policy.param_count());
  const TokenSeq history = concat(task.prompt, trace);
  for_each_answer(policy, history, task.answer_length(),
                  [&](const TokenSeq& answer, double prob) {
                    if (reward_verifier(answer, task).value != 0.0) {
                      expectation += prob * estimate_verifier(policy, task, trace, answer).vector;
                    }
                  });
  return expectation;
}

double finite_difference_max_rel_error(const std::function<double(const ParamVec&)>& f,
                                       const ParamVec& grad, const ParamVec& at, double step,
                                       double floor) {
  double worst = 0.0;
  ParamVec point = at;
  for (int i = 0; i < at.size(); ++i) {
    const double original = point[i];
    point[i] = original + step;
    const double hi = f(point);
    point[i] = original - step;
    const double lo = f(point);
    point[i] = original;
    const double estimate = (hi - lo) / (2.0 * step);
    const double denom = std::max({std::abs(estimate), std::abs(grad[i]), floor});
    worst = std::max(worst, std::abs(estimate - grad[i]) / denom);
  }
  return worst;
}

GradCheckReport check_gradients(const Policy& policy, const TaskInstance& task,
                                const OracleOptions& options) {
  GradCheckReport report;

  // Trace log-probability gradient against finite differences, on the
  // task's reference continuation appended to an enumerated trace.
  const std::vector<TokenSeq> traces =
      enumerate_traces(task.vocab, task.trace_budget, options.enumeration_cap);
  const TokenSeq& probe_trace = traces[traces.size() / 2];
  const TokenSeq continuation = [&] {
    TokenSeq c = probe_trace;
    c.insert(c.end(), task.reference.begin(), task.reference.end());
    return c;
  }();
  auto with_params = [&](const ParamVec& params) {
    Policy probe = policy;
    probe.set_params(params);
    return probe;
  };
  report.logprob_max_rel_error = finite_difference_max_rel_error(
      [&](const ParamVec& params) { return logprob(with_params(params), task.prompt, continuation); },
      grad_logprob(policy, task.prompt, continuation), policy.params());

  report.objective_verifier_max_rel_error = finite_difference_max_rel_error(
      [&](const ParamVec& params) {
        return exact_objective(with_params(params), task, ObjectiveMode::Verifier, options);
      },
      exact_gradient(policy, task, ObjectiveMode::Verifier, options), policy.params());

  report.objective_verifree_max_rel_error = finite_difference_max_rel_error(
      [&](const ParamVec& params) {
        return exact_objective(with_params(params), task, ObjectiveMode::VeriFree, options);
      },
      exact_gradient(policy, task, ObjectiveMode::VeriFree, options), policy.params());

  return report;
}

}  // namespace verifree
