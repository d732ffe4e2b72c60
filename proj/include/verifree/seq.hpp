#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace verifree {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Symbol alphabet shared by tasks and policies. Two indices are special:
/// `answer_open_id` terminates a reasoning trace (the boundary between trace
/// and answer) and `stop_id` is the response terminator analogue. They may
/// coincide only when the vocab is declared to use a combined terminator.
struct Vocab {
  int size = 0;
  TokenId stop_id = 0;
  TokenId answer_open_id = 0;
  bool combined_terminator = false;
  std::vector<std::string> display;

  Vocab() = default;
  Vocab(int size, TokenId stop_id, TokenId answer_open_id, bool combined_terminator = false);

  /// Standard lab layout: ordinary tokens 0..size-3, then STOP, then OPEN.
  static Vocab lab(int size);

  /// Number of ordinary (non-special) tokens.
  int ordinary_count() const { return size - (combined_terminator ? 1 : 2); }
  bool valid_token(TokenId t) const { return t >= 0 && t < size; }
  const std::string& label(TokenId t) const { return display[static_cast<size_t>(t)]; }
  void validate() const;
};

/// One prompt/answer problem. `equivalents`, when non-empty, is the set of
/// answers all judged correct and must contain `reference`. All members must
/// have the reference's length: the answer distribution is over sequences of
/// exactly that length, which is what makes the expected verifier reward
/// equal the summed answer probabilities.
struct TaskInstance {
  Vocab vocab;
  TokenSeq prompt;
  TokenSeq reference;
  std::vector<TokenSeq> equivalents;
  int trace_budget = 1;
  std::string id;

  void validate() const;
  int answer_length() const { return static_cast<int>(reference.size()); }
};

/// Deterministic generator of TaskInstances. `size` is the structural size:
/// number of lookup keys, or parity bit-string length.
struct TaskFamily {
  std::string name;
  std::uint64_t seed = 1;
  int instance_count = 8;
  int vocab_size = 6;
  int trace_budget = 2;
  int size = 4;
  int equiv_size = 2;  // multi-answer only
};

inline constexpr std::size_t kDefaultEnumerationCap = 2'000'000;

/// Every trace that ends with answer_open_id at position <= budget, plus
/// every length-budget trace containing no answer_open_id (forced
/// termination). The set is prefix-free, so under any policy the trace
/// probabilities sum to 1.
std::vector<TokenSeq> enumerate_traces(const Vocab& vocab, int budget,
                                       std::size_t cap = kDefaultEnumerationCap);

/// Count of the set above, without materializing it.
std::size_t count_traces(const Vocab& vocab, int budget);

/// Deterministic task construction. Families: "lookup", "parity",
/// "multi-answer". Unknown names raise ConfigError.
TaskInstance make_task(const TaskFamily& family, int index);

/// Lookup instance with an explicit answer table (used by make_task and
/// directly constructible for tests).
TaskInstance make_lookup_task(const std::vector<TokenId>& table, int key,
                              const Vocab& vocab, int trace_budget);

bool ends_with_answer_open(const Vocab& vocab, const TokenSeq& trace);

}  // namespace verifree
