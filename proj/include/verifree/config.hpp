#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "verifree/policy.hpp"
#include "verifree/seq.hpp"
#include "verifree/trainer.hpp"

namespace verifree {

/// Experiment configuration, parsed from a line-oriented file of
/// `section.key = value` entries ('#' comments allowed). Unknown keys are
/// rejected; every run's output header embeds the resolved values.
class ExperimentConfig {
 public:
  ExperimentConfig();  // defaults only

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_text(const std::string& text);

  /// `--set section.key=value`, applied after file parse.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool has_value(const std::string& key) const;

  /// Errors if a required key (no default) was never assigned.
  void require(const std::string& key) const;

  /// Canonical sorted `key = value` text of the resolved configuration.
  std::string canonical_text() const;
  /// FNV-1a hash of the canonical text, as 16 hex digits.
  std::string hash() const;

  TaskFamily task_family() const;
  Policy initial_policy() const;
  TrainConfig train_config() const;
  std::vector<TrainerArm> compare_arms() const;
  std::vector<std::uint64_t> compare_seeds() const;

 private:
  std::map<std::string, std::string> values_;    // resolved (defaults + assignments)
  std::map<std::string, std::string> assigned_;  // explicitly assigned only
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace verifree
