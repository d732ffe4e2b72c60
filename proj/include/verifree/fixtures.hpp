#pragma once

#include <cstdint>
#include <vector>

#include "verifree/policy.hpp"
#include "verifree/seq.hpp"

namespace verifree {

/// A (policy, task) pair with enumerable trace space, for oracle sweeps.
struct Fixture {
  TaskInstance task;
  Policy policy;
  std::uint64_t policy_seed = 0;
};

/// Deterministic fixture stream, rotating task families, vocab sizes,
/// budgets and policy parameterizations. `unique_answer` restricts to tasks
/// without an equivalence class.
Fixture make_fixture(int index, std::uint64_t seed, bool unique_answer = false);

std::vector<Fixture> make_fixtures(int count, std::uint64_t seed, bool unique_answer = false);

}  // namespace verifree
