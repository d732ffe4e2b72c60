#include "verifree/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "verifree/errors.hpp"

namespace verifree {

PolicyKind policy_kind_from_string(const std::string& name) {
  if (name == "tabular") return PolicyKind::Tabular;
  if (name == "linear") return PolicyKind::LinearFeatures;
  throw ConfigError("policy.kind: unknown value \"" + name + "\" (known: tabular, linear)");
}

std::string to_string(PolicyKind kind) {
  return kind == PolicyKind::Tabular ? "tabular" : "linear";
}

ParamLayout ParamLayout::make(PolicyKind kind, int vocab_size, int order) {
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (order < 1) throw std::invalid_argument("policy order must be >= 1");
  ParamLayout layout;
  layout.kind = kind;
  layout.vocab_size = vocab_size;
  layout.order = order;
  std::size_t contexts = 1;
  for (int i = 0; i < order; ++i) contexts *= static_cast<std::size_t>(vocab_size + 1);
  if (contexts > 1'000'000) {
    throw std::invalid_argument("tabular context space too large: (vocab+1)^order = " +
                                std::to_string(contexts));
  }
  layout.num_contexts = static_cast<int>(contexts);
  layout.feature_dim = order * (vocab_size + 1);
  layout.param_count = kind == PolicyKind::Tabular ? layout.num_contexts * vocab_size
                                                   : vocab_size * layout.feature_dim;
  return layout;
}

int ParamLayout::context_id(std::span<const TokenId> history) const {
  // Oldest-to-newest positional encoding, base vocab_size+1, BOS-padded.
  int id = 0;
  const int base = vocab_size + 1;
  const std::size_t n = history.size();
  for (int i = order; i >= 1; --i) {
    const TokenId t = n >= static_cast<std::size_t>(i) ? history[n - static_cast<std::size_t>(i)]
                                                       : bos();
    id = id * base + static_cast<int>(t);
  }
  return id;
}

std::string ParamLayout::describe(int coord) const {
  if (kind == PolicyKind::Tabular) {
    return "context " + std::to_string(coord / vocab_size) + ", token " +
           std::to_string(coord % vocab_size);
  }
  return "token " + std::to_string(coord / feature_dim) + ", feature " +
         std::to_string(coord % feature_dim);
}

Policy::Policy(Vocab vocab, PolicyKind kind, int order, double temperature)
    : vocab_(std::move(vocab)),
      layout_(ParamLayout::make(kind, vocab_.size, order)),
      temperature_(temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  params_ = ParamVec::Zero(layout_.param_count);
}

Policy Policy::uniform(const Vocab& vocab, PolicyKind kind, int order) {
  return Policy(vocab, kind, order);
}

Policy Policy::random(const Vocab& vocab, PolicyKind kind, int order, double scale,
                      std::uint64_t seed, double temperature) {
  Policy policy(vocab, kind, order, temperature);
  std::mt19937_64 engine(derive_stream_id(seed, 0x9017ull));
  std::normal_distribution<double> noise(0.0, 1.0);
  ParamVec params(policy.param_count());
  for (int i = 0; i < params.size(); ++i) params[i] = scale * noise(engine);
  policy.set_params(std::move(params));
  return policy;
}

void Policy::set_temperature(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
  temperature_ = t;
}

void Policy::set_params(ParamVec params) {
  if (params.size() != layout_.param_count) {
    throw std::invalid_argument("parameter vector size mismatch");
  }
  if (!params.allFinite()) throw std::invalid_argument("parameters must be finite");
  params_ = std::move(params);
}

Eigen::VectorXd Policy::logits_for(std::span<const TokenId> history) const {
  const int V = layout_.vocab_size;
  Eigen::VectorXd logits(V);
  if (layout_.kind == PolicyKind::Tabular) {
    const int base = layout_.coord_tabular(layout_.context_id(history), 0);
    logits = params_.segment(base, V);
  } else {
    // One active one-hot feature per context position.
    logits.setZero();
    const std::size_t n = history.size();
    for (int i = 1; i <= layout_.order; ++i) {
      const TokenId t = n >= static_cast<std::size_t>(i) ? history[n - static_cast<std::size_t>(i)]
                                                         : layout_.bos();
      const int feature = (i - 1) * (layout_.vocab_size + 1) + static_cast<int>(t);
      for (TokenId v = 0; v < V; ++v) logits[v] += params_[layout_.coord_linear(v, feature)];
    }
  }
  return logits;
}

namespace {

Eigen::VectorXd log_softmax(Eigen::VectorXd logits) {
  const double peak = logits.maxCoeff();
  const double lse = peak + std::log((logits.array() - peak).exp().sum());
  return logits.array() - lse;
}

void check_token(const Policy& policy, TokenId t, const char* what) {
  if (t < 0 || t >= policy.vocab().size) {
    throw std::invalid_argument(std::string(what) + ": invalid token index " + std::to_string(t) +
                                " for vocab size " + std::to_string(policy.vocab().size));
  }
}

}  // namespace

Eigen::VectorXd Policy::next_logprobs(std::span<const TokenId> history) const {
  return log_softmax(logits_for(history));
}

Eigen::VectorXd Policy::next_logprobs_sampling(std::span<const TokenId> history) const {
  if (temperature_ == 1.0) return next_logprobs(history);
  return log_softmax(logits_for(history) / temperature_);
}

void Policy::accumulate_score(std::span<const TokenId> history, TokenId token, double coeff,
                              ParamVec& grad) const {
  const int V = layout_.vocab_size;
  const Eigen::VectorXd probs = next_logprobs(history).array().exp();
  if (layout_.kind == PolicyKind::Tabular) {
    const int base = layout_.coord_tabular(layout_.context_id(history), 0);
    for (TokenId v = 0; v < V; ++v) {
      grad[base + v] += coeff * ((v == token ? 1.0 : 0.0) - probs[v]);
    }
  } else {
    const std::size_t n = history.size();
    for (int i = 1; i <= layout_.order; ++i) {
      const TokenId t = n >= static_cast<std::size_t>(i) ? history[n - static_cast<std::size_t>(i)]
                                                         : layout_.bos();
      const int feature = (i - 1) * (layout_.vocab_size + 1) + static_cast<int>(t);
      for (TokenId v = 0; v < V; ++v) {
        grad[layout_.coord_linear(v, feature)] += coeff * ((v == token ? 1.0 : 0.0) - probs[v]);
      }
    }
  }
}

double logprob(const Policy& policy, const TokenSeq& prompt, const TokenSeq& continuation,
               bool* warned_empty) {
  if (continuation.empty()) {
    if (warned_empty) *warned_empty = true;
    return 0.0;
  }
  for (TokenId t : prompt) check_token(policy, t, "prompt");
  TokenSeq history = prompt;
  history.reserve(prompt.size() + continuation.size());
  double total = 0.0;
  for (TokenId t : continuation) {
    check_token(policy, t, "continuation");
    total += policy.next_logprobs(history)[t];
    history.push_back(t);
  }
  return total;
}

ParamVec grad_logprob(const Policy& policy, const TokenSeq& prompt, const TokenSeq& continuation) {
  ParamVec grad = ParamVec::Zero(policy.param_count());
  for (TokenId t : prompt) check_token(policy, t, "prompt");
  TokenSeq history = prompt;
  history.reserve(prompt.size() + continuation.size());
  for (TokenId t : continuation) {
    check_token(policy, t, "continuation");
    policy.accumulate_score(history, t, 1.0, grad);
    history.push_back(t);
  }
  return grad;
}

namespace {

TokenId draw_from_logprobs(const Eigen::VectorXd& logprobs, RolloutRng& rng) {
  const double u = rng.uniform01();
  double cum = 0.0;
  const int V = static_cast<int>(logprobs.size());
  for (TokenId t = 0; t < V; ++t) {
    cum += std::exp(logprobs[t]);
    if (u < cum) return t;
  }
  return static_cast<TokenId>(V - 1);  // guard against rounding at u ~ 1
}

}  // namespace

Rollout sample_trace(const Policy& policy, const TokenSeq& prompt, int budget, RolloutRng& rng) {
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  for (TokenId t : prompt) check_token(policy, t, "prompt");
  Rollout rollout;
  rollout.rng_stream_id = rng.stream_id;
  TokenSeq history = prompt;
  while (static_cast<int>(rollout.trace.size()) < budget) {
    const Eigen::VectorXd sampling = policy.next_logprobs_sampling(history);
    const TokenId t = draw_from_logprobs(sampling, rng);
    const double score_lp =
        policy.temperature() == 1.0 ? sampling[t] : policy.next_logprobs(history)[t];
    rollout.trace.push_back(t);
    rollout.per_token_logprob.push_back(score_lp);
    rollout.total_logprob += score_lp;
    rollout.per_token_sample_logprob.push_back(sampling[t]);
    rollout.total_sample_logprob += sampling[t];
    history.push_back(t);
    if (t == policy.vocab().answer_open_id) {
      rollout.boundary_terminated = true;
      break;
    }
  }
  return rollout;
}

TokenSeq sample_answer(const Policy& policy, const TokenSeq& history, int length, RolloutRng& rng) {
  TokenSeq answer;
  TokenSeq ctx = history;
  for (int i = 0; i < length; ++i) {
    const TokenId t = draw_from_logprobs(policy.next_logprobs_sampling(ctx), rng);
    answer.push_back(t);
    ctx.push_back(t);
  }
  return answer;
}

TokenSeq greedy_answer(const Policy& policy, const TokenSeq& history, int length) {
  TokenSeq answer;
  TokenSeq ctx = history;
  for (int i = 0; i < length; ++i) {
    const Eigen::VectorXd lp = policy.next_logprobs(ctx);
    TokenId best = 0;
    for (TokenId t = 1; t < static_cast<TokenId>(lp.size()); ++t) {
      if (lp[t] > lp[best]) best = t;
    }
    answer.push_back(best);
    ctx.push_back(best);
  }
  return answer;
}

}  // namespace verifree
