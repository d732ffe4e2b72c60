#include "verifree/seq.hpp"

#include <algorithm>
#include <stdexcept>

#include "verifree/errors.hpp"
#include "verifree/rng.hpp"

namespace verifree {

Vocab::Vocab(int size, TokenId stop_id, TokenId answer_open_id, bool combined_terminator)
    : size(size),
      stop_id(stop_id),
      answer_open_id(answer_open_id),
      combined_terminator(combined_terminator) {
  display.reserve(static_cast<size_t>(size));
  for (TokenId t = 0; t < size; ++t) {
    if (t == answer_open_id) {
      display.push_back(combined_terminator ? "OPEN+STOP" : "OPEN");
    } else if (t == stop_id) {
      display.push_back("STOP");
    } else {
      display.push_back("t" + std::to_string(t));
    }
  }
  validate();
}

Vocab Vocab::lab(int size) {
  if (size < 3) throw std::invalid_argument("lab vocab needs size >= 3");
  return Vocab(size, /*stop_id=*/size - 2, /*answer_open_id=*/size - 1);
}

void Vocab::validate() const {
  if (size < 2) throw std::invalid_argument("vocab size must be >= 2");
  if (!valid_token(stop_id)) throw std::invalid_argument("stop_id out of range");
  if (!valid_token(answer_open_id)) throw std::invalid_argument("answer_open_id out of range");
  if (stop_id == answer_open_id && !combined_terminator) {
    throw std::invalid_argument(
        "stop_id equals answer_open_id but the vocab does not declare a combined terminator");
  }
  if (display.size() != static_cast<size_t>(size)) {
    throw std::invalid_argument("display labels must cover every token");
  }
}

void TaskInstance::validate() const {
  vocab.validate();
  if (reference.empty()) throw std::invalid_argument("task reference answer must be non-empty");
  if (trace_budget < 1) throw std::invalid_argument("trace_budget must be >= 1");
  auto check_tokens = [&](const TokenSeq& seq, const char* what) {
    for (TokenId t : seq) {
      if (!vocab.valid_token(t)) {
        throw std::invalid_argument(std::string(what) + " contains invalid token index " +
                                    std::to_string(t));
      }
    }
  };
  check_tokens(prompt, "prompt");
  check_tokens(reference, "reference");
  if (!equivalents.empty()) {
    bool has_reference = false;
    for (const TokenSeq& alt : equivalents) {
      check_tokens(alt, "equivalent answer");
      if (alt.size() != reference.size()) {
        throw std::invalid_argument(
            "equivalent answers must share the reference length (fixed-length answer space)");
      }
      if (alt == reference) has_reference = true;
    }
    if (!has_reference) {
      throw std::invalid_argument("equivalents must include the reference answer");
    }
  }
}

bool ends_with_answer_open(const Vocab& vocab, const TokenSeq& trace) {
  return !trace.empty() && trace.back() == vocab.answer_open_id;
}

std::size_t count_traces(const Vocab& vocab, int budget) {
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  vocab.validate();
  const std::size_t interior = static_cast<std::size_t>(vocab.size - 1);
  // Boundary-terminated traces of length p have p-1 interior tokens; forced
  // leaves have `budget` interior tokens.
  std::size_t total = 0;
  std::size_t pow = 1;
  for (int p = 1; p <= budget; ++p) {
    total += pow;
    if (pow > (static_cast<std::size_t>(-1) / (interior ? interior : 1)) / 2) {
      return static_cast<std::size_t>(-1);  // saturate on overflow
    }
    pow *= interior;
  }
  return total + pow;
}

std::vector<TokenSeq> enumerate_traces(const Vocab& vocab, int budget, std::size_t cap) {
  const std::size_t n = count_traces(vocab, budget);
  if (n > cap) {
    throw std::runtime_error("enumeration too large: " + std::to_string(n) +
                             " traces exceeds cap " + std::to_string(cap));
  }
  std::vector<TokenSeq> out;
  out.reserve(n);
  TokenSeq current;
  // Depth-first walk; a node is a leaf when it ends with the answer-open
  // token or exhausts the budget.
  auto walk = [&](auto&& self) -> void {
    if (!current.empty() && (current.back() == vocab.answer_open_id ||
                             static_cast<int>(current.size()) == budget)) {
      out.push_back(current);
      return;
    }
    for (TokenId t = 0; t < vocab.size; ++t) {
      current.push_back(t);
      self(self);
      current.pop_back();
    }
  };
  // Forced-termination leaves containing answer_open before the end would be
  // double counts; the walk above cannot produce them because any trace is
  // cut at the first answer_open emission.
  walk(walk);
  return out;
}

namespace {

TokenId nth_ordinary(const Vocab& vocab, int n) {
  int seen = 0;
  for (TokenId t = 0; t < vocab.size; ++t) {
    if (t == vocab.stop_id || t == vocab.answer_open_id) continue;
    if (seen == n) return t;
    ++seen;
  }
  throw std::invalid_argument("ordinary token index out of range");
}

std::vector<TokenId> lookup_table(const TaskFamily& family, const Vocab& vocab) {
  std::vector<TokenId> table(static_cast<size_t>(family.size));
  std::mt19937_64 engine(derive_stream_id(family.seed, 0x100cull));
  std::uniform_int_distribution<int> pick(0, vocab.ordinary_count() - 1);
  for (auto& entry : table) entry = nth_ordinary(vocab, pick(engine));
  return table;
}

}  // namespace

TaskInstance make_lookup_task(const std::vector<TokenId>& table, int key, const Vocab& vocab,
                              int trace_budget) {
  if (key < 0 || key >= static_cast<int>(table.size())) {
    throw std::invalid_argument("lookup key out of range");
  }
  TaskInstance task;
  task.vocab = vocab;
  task.prompt = {nth_ordinary(vocab, key % vocab.ordinary_count())};
  task.reference = {table[static_cast<size_t>(key)]};
  task.trace_budget = trace_budget;
  task.id = "lookup/" + std::to_string(key);
  task.validate();
  return task;
}

TaskInstance make_task(const TaskFamily& family, int index) {
  if (index < 0 || index >= family.instance_count) {
    throw std::invalid_argument("task index " + std::to_string(index) +
                                " out of range for family instance count " +
                                std::to_string(family.instance_count));
  }
  const Vocab vocab = Vocab::lab(family.vocab_size);

  if (family.name == "lookup") {
    if (family.size > vocab.ordinary_count()) {
      throw ConfigError("task.size: lookup needs at most " +
                        std::to_string(vocab.ordinary_count()) + " keys for vocab size " +
                        std::to_string(family.vocab_size));
    }
    const int key = index % family.size;
    TaskInstance task = make_lookup_task(lookup_table(family, vocab), key, vocab,
                                         family.trace_budget);
    task.id = family.name + "/" + std::to_string(index);
    return task;
  }

  if (family.name == "parity") {
    if (vocab.ordinary_count() < 2) {
      throw ConfigError("task.vocab_size: parity needs at least two ordinary tokens");
    }
    std::mt19937_64 engine(derive_stream_id(family.seed, 0xba17ull, static_cast<std::uint64_t>(index)));
    std::uniform_int_distribution<int> bit(0, 1);
    TaskInstance task;
    task.vocab = vocab;
    int parity = 0;
    for (int i = 0; i < family.size; ++i) {
      const int b = bit(engine);
      parity ^= b;
      task.prompt.push_back(nth_ordinary(vocab, b));
    }
    task.reference = {nth_ordinary(vocab, parity)};
    task.trace_budget = family.trace_budget;
    task.id = family.name + "/" + std::to_string(index);
    task.validate();
    return task;
  }

  if (family.name == "multi-answer") {
    if (family.equiv_size < 2) {
      throw ConfigError("task.equiv_size: multi-answer needs an equivalence set of size >= 2");
    }
    if (family.equiv_size > vocab.ordinary_count()) {
      throw ConfigError("task.equiv_size exceeds the ordinary token count");
    }
    const int key = index % family.size;
    TaskInstance task = make_lookup_task(lookup_table(family, vocab), key, vocab,
                                         family.trace_budget);
    task.id = family.name + "/" + std::to_string(index);
    // Equivalence class: the reference plus deterministic distinct alternates.
    std::mt19937_64 engine(derive_stream_id(family.seed, 0xe900ull, static_cast<std::uint64_t>(key)));
    std::vector<TokenId> pool;
    for (int n = 0; n < vocab.ordinary_count(); ++n) {
      TokenId t = nth_ordinary(vocab, n);
      if (t != task.reference[0]) pool.push_back(t);
    }
    std::shuffle(pool.begin(), pool.end(), engine);
    task.equivalents.push_back(task.reference);
    for (int i = 0; i + 1 < family.equiv_size; ++i) {
      task.equivalents.push_back({pool[static_cast<size_t>(i)]});
    }
    task.validate();
    return task;
  }

  throw ConfigError("unknown task family \"" + family.name +
                    "\" (known: lookup, parity, multi-answer)");
}

}  // namespace verifree
