#include "verifree/fixtures.hpp"

#include "verifree/rng.hpp"

namespace verifree {

Fixture make_fixture(int index, std::uint64_t seed, bool unique_answer) {
  const std::uint64_t salt = derive_stream_id(seed, 0xf1c5ull, static_cast<std::uint64_t>(index));

  TaskFamily family;
  switch (unique_answer ? index % 2 : index % 3) {
    case 0: family.name = "lookup"; break;
    case 1: family.name = "parity"; break;
    default: family.name = "multi-answer"; break;
  }
  family.seed = salt;
  family.vocab_size = 4 + index % 3;           // 4..6
  family.trace_budget = 2 + (index / 3) % 2;   // 2..3
  family.size = family.name == "parity" ? 2 : 2 + index % 2;
  family.instance_count = family.size;
  family.equiv_size = 2;

  TaskInstance task = make_task(family, index % family.instance_count);
  const std::uint64_t policy_seed = derive_stream_id(salt, 0x9e11ull);
  const PolicyKind kind = index % 2 == 0 ? PolicyKind::Tabular : PolicyKind::LinearFeatures;
  Policy policy = Policy::random(task.vocab, kind, /*order=*/2, /*scale=*/0.7, policy_seed);
  return Fixture{std::move(task), std::move(policy), policy_seed};
}

std::vector<Fixture> make_fixtures(int count, std::uint64_t seed, bool unique_answer) {
  std::vector<Fixture> fixtures;
  fixtures.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) fixtures.push_back(make_fixture(i, seed, unique_answer));
  return fixtures;
}

}  // namespace verifree
