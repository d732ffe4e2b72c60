#pragma once

#include <functional>
#include <optional>
#include <string>

#include "verifree/estimators.hpp"
#include "verifree/policy.hpp"
#include "verifree/seq.hpp"

namespace verifree {

enum class ObjectiveMode { Verifier, VeriFree };

struct OracleOptions {
  std::size_t enumeration_cap = kDefaultEnumerationCap;
};

/// Expected reward computed by full enumeration. Verifier mode sums
/// pi(trace) * pi(answer | trace) * correct(answer) over every trace and
/// every fixed-length answer (equivalence-aware); verifier-free mode sums
/// pi(trace) * pi(reference | trace) over traces.
double exact_objective(const Policy& policy, const TaskInstance& task, ObjectiveMode mode,
                       const OracleOptions& options = {});

/// Probability-weighted sum of per-outcome estimator values; the ground-truth
/// gradient both single-sample estimators are checked against.
ParamVec exact_gradient(const Policy& policy, const TaskInstance& task, ObjectiveMode mode,
                        const OracleOptions& options = {});

/// Exact second-moment accounting for the two single-sample estimators.
/// The totals obey var_verifier = var_verifree + decomposition_inner: the
/// trace-conditional answer variance is exactly what marginalizing the
/// answer removes.
struct VarianceReport {
  double var_verifier_trace = 0.0;
  double var_verifree_trace = 0.0;
  double decomposition_inner = 0.0;  // E_trace[Var_answer(verifier estimate)]
  std::optional<ParamVec> per_coordinate_verifier;
  std::optional<ParamVec> per_coordinate_verifree;
  std::string task_id;
  std::uint64_t policy_seed = 0;

  double gap() const { return var_verifier_trace - var_verifree_trace; }
  bool inequality_ok(double tol = 1e-10) const { return gap() >= -tol; }
};

struct CovarianceOptions {
  bool per_coordinate = false;
  std::size_t enumeration_cap = kDefaultEnumerationCap;
};

VarianceReport exact_estimator_covariance(const Policy& policy, const TaskInstance& task,
                                          const CovarianceOptions& options = {});

/// E[verifier estimate | trace], by one-step enumeration over the answer
/// draw. Marginalizing the answer this way reproduces the verifier-free
/// estimate, which is the identity behind the variance reduction.
ParamVec conditional_verifier_expectation(const Policy& policy, const TaskInstance& task,
                                          const TokenSeq& trace);

/// Central finite differences of a scalar function against a claimed
/// gradient; returns the max relative error with an absolute floor.
double finite_difference_max_rel_error(const std::function<double(const ParamVec&)>& f,
                                       const ParamVec& grad, const ParamVec& at,
                                       double step = 1e-6, double floor = 1e-8);

struct GradCheckReport {
  double logprob_max_rel_error = 0.0;
  double objective_verifier_max_rel_error = 0.0;
  double objective_verifree_max_rel_error = 0.0;
  double tolerance = 1e-5;
  bool all_ok() const {
    return logprob_max_rel_error < tolerance && objective_verifier_max_rel_error < tolerance &&
           objective_verifree_max_rel_error < tolerance;
  }
};

/// Finite-difference audit of the analytic log-probability gradient and of
/// both exact objective gradients. Failures are reported, not thrown.
GradCheckReport check_gradients(const Policy& policy, const TaskInstance& task,
                                const OracleOptions& options = {});

}  // namespace verifree
