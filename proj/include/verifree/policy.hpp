#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "verifree/rng.hpp"
#include "verifree/seq.hpp"

namespace verifree {

using ParamVec = Eigen::VectorXd;

enum class PolicyKind { Tabular, LinearFeatures };

PolicyKind policy_kind_from_string(const std::string& name);
std::string to_string(PolicyKind kind);

/// Maps flat parameter coordinates to (context, token) slots for tabular
/// policies or (token, feature) slots for linear ones. Contexts are the last
/// `order` tokens of the history, left-padded with a virtual BOS symbol.
struct ParamLayout {
  PolicyKind kind = PolicyKind::Tabular;
  int vocab_size = 0;
  int order = 1;
  int num_contexts = 0;   // (vocab_size + 1)^order
  int feature_dim = 0;    // order * (vocab_size + 1), linear only
  int param_count = 0;

  static ParamLayout make(PolicyKind kind, int vocab_size, int order);

  TokenId bos() const { return vocab_size; }
  int context_id(std::span<const TokenId> history) const;
  int coord_tabular(int context, TokenId token) const { return context * vocab_size + token; }
  int coord_linear(TokenId token, int feature) const { return token * feature_dim + feature; }
  std::string describe(int coord) const;
};

/// Autoregressive next-token policy over a Vocab, conditioned on the last
/// `order` tokens. Sampling may run at a temperature; log-probabilities and
/// gradients are always evaluated at temperature 1.
class Policy {
 public:
  Policy(Vocab vocab, PolicyKind kind, int order, double temperature = 1.0);

  static Policy uniform(const Vocab& vocab, PolicyKind kind, int order);
  /// Logits/weights drawn N(0, scale^2); deterministic in seed.
  static Policy random(const Vocab& vocab, PolicyKind kind, int order, double scale,
                       std::uint64_t seed, double temperature = 1.0);

  const Vocab& vocab() const { return vocab_; }
  const ParamLayout& layout() const { return layout_; }
  int order() const { return layout_.order; }
  double temperature() const { return temperature_; }
  void set_temperature(double t);

  const ParamVec& params() const { return params_; }
  void set_params(ParamVec params);
  int param_count() const { return layout_.param_count; }

  /// Temperature-1 log-probabilities of every next token given a history.
  Eigen::VectorXd next_logprobs(std::span<const TokenId> history) const;
  /// As above at the sampling temperature.
  Eigen::VectorXd next_logprobs_sampling(std::span<const TokenId> history) const;

  /// Adds coeff * d(log pi(token | history))/d(theta) into grad.
  void accumulate_score(std::span<const TokenId> history, TokenId token, double coeff,
                        ParamVec& grad) const;

 private:
  Eigen::VectorXd logits_for(std::span<const TokenId> history) const;

  Vocab vocab_;
  ParamLayout layout_;
  double temperature_;
  ParamVec params_;
};

/// One sampled reasoning trace with its log-probabilities. `per_token_logprob`
/// is always the temperature-1 scoring value; the sampling-temperature values
/// are kept alongside when they differ.
struct Rollout {
  TokenSeq trace;
  std::vector<double> per_token_logprob;
  double total_logprob = 0.0;
  std::vector<double> per_token_sample_logprob;
  double total_sample_logprob = 0.0;
  std::uint64_t rng_stream_id = 0;
  bool boundary_terminated = false;  // false when the budget forced the stop
};

/// log pi(continuation | prompt), exact, temperature 1. An empty continuation
/// yields 0 and sets *warned_empty when provided.
double logprob(const Policy& policy, const TokenSeq& prompt, const TokenSeq& continuation,
               bool* warned_empty = nullptr);

/// d(log pi(continuation | prompt))/d(theta), exact.
ParamVec grad_logprob(const Policy& policy, const TokenSeq& prompt, const TokenSeq& continuation);

/// Draws a trace token-by-token until the answer-open token or the budget.
Rollout sample_trace(const Policy& policy, const TokenSeq& prompt, int budget, RolloutRng& rng);

/// Draws `length` answer tokens after `history` (prompt ++ trace).
TokenSeq sample_answer(const Policy& policy, const TokenSeq& history, int length, RolloutRng& rng);

/// Argmax decode of `length` answer tokens; ties break to the lowest index.
TokenSeq greedy_answer(const Policy& policy, const TokenSeq& history, int length);

}  // namespace verifree
