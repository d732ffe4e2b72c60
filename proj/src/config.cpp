#include "verifree/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "verifree/errors.hpp"

namespace verifree {

namespace {

struct KeySpec {
  const char* key;
  const char* default_value;  // nullptr marks a required key
};

// The full key table; anything else is rejected by name.
constexpr std::array<KeySpec, 34> kKeys{{
    {"task.family", nullptr},
    {"task.seed", "1"},
    {"task.instances", "8"},
    {"task.size", "4"},
    {"task.vocab_size", "6"},
    {"task.trace_budget", "2"},
    {"task.equiv_size", "2"},
    {"task.holdout", "4"},
    {"policy.kind", "tabular"},
    {"policy.order", "2"},
    {"policy.temperature", "1.0"},
    {"policy.init_scale", "0.0"},
    {"policy.seed", "7"},
    {"estimator.kind", nullptr},
    {"estimator.reward", "verifree"},
    {"estimator.clip_eps", "0.2"},
    {"rollout.group_size", "8"},
    {"trainer.steps", "600"},
    {"trainer.lr", "0.05"},
    {"trainer.prompts_per_step", "16"},
    {"trainer.optimizer", "adam"},
    {"trainer.eval_every", "10"},
    {"trainer.reuse_epochs", "1"},
    {"trainer.seed", "42"},
    {"compare.arms", "verifree-rloo,verifree-no-rloo,shaped-verifier,jlb,latro,verifree-ppo"},
    {"compare.seeds", "1,2,3,4,5"},
    {"compare.threshold", "0.8"},
    {"variance.count", "50"},
    {"variance.seed", "123"},
    {"check.count", "20"},
    {"check.seed", "321"},
    {"output.metrics", "train_metrics.jsonl"},
    {"output.report", "report.csv"},
    {"output.compare_metrics", "compare_metrics.jsonl"},
}};

const KeySpec* find_key(const std::string& key) {
  for (const KeySpec& spec : kKeys) {
    if (key == spec.key) return &spec;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream stream(csv);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

ExperimentConfig::ExperimentConfig() {
  for (const KeySpec& spec : kKeys) {
    if (spec.default_value) values_[spec.key] = spec.default_value;
  }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig config;
  std::stringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected `section.key = value`, got \"" + stripped + "\"");
    }
    config.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return config;
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--set expects section.key=value, got \"" + assignment + "\"");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown config key \"" + key + "\"");
  if (value.empty()) throw ConfigError("config key \"" + key + "\" has an empty value");
  values_[key] = value;
  assigned_[key] = value;
}

bool ExperimentConfig::has_value(const std::string& key) const { return values_.count(key) > 0; }

void ExperimentConfig::require(const std::string& key) const {
  if (!has_value(key)) throw ConfigError("missing required config key \"" + key + "\"");
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  if (!find_key(key)) throw ConfigError("unknown config key \"" + key + "\"");
  require(key);
  return values_.at(key);
}

int ExperimentConfig::get_int(const std::string& key) const {
  const std::string& raw = get(key);
  try {
    std::size_t used = 0;
    const int value = std::stoi(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return value;
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\": expected an integer, got \"" + raw + "\"");
  }
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string& raw = get(key);
  try {
    std::size_t used = 0;
    const double value = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return value;
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\": expected a number, got \"" + raw + "\"");
  }
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const {
  const std::string& raw = get(key);
  try {
    std::size_t used = 0;
    const std::uint64_t value = std::stoull(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return value;
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\": expected an unsigned integer, got \"" + raw +
                      "\"");
  }
}

std::string ExperimentConfig::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : values_) {  // std::map iterates sorted
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_text())));
  return buffer;
}

TaskFamily ExperimentConfig::task_family() const {
  require("task.family");
  TaskFamily family;
  family.name = get("task.family");
  family.seed = get_u64("task.seed");
  family.instance_count = get_int("task.instances");
  family.size = get_int("task.size");
  family.vocab_size = get_int("task.vocab_size");
  family.trace_budget = get_int("task.trace_budget");
  family.equiv_size = get_int("task.equiv_size");
  if (family.instance_count < 1) throw ConfigError("task.instances must be >= 1");
  if (family.trace_budget < 1) throw ConfigError("task.trace_budget must be >= 1");
  if (family.vocab_size < 3) throw ConfigError("task.vocab_size must be >= 3");
  return family;
}

Policy ExperimentConfig::initial_policy() const {
  const TaskFamily family = task_family();
  const Vocab vocab = Vocab::lab(family.vocab_size);
  const PolicyKind kind = policy_kind_from_string(get("policy.kind"));
  const int order = get_int("policy.order");
  const double scale = get_double("policy.init_scale");
  const double temperature = get_double("policy.temperature");
  if (scale == 0.0) {
    Policy policy = Policy::uniform(vocab, kind, order);
    policy.set_temperature(temperature);
    return policy;
  }
  return Policy::random(vocab, kind, order, scale, get_u64("policy.seed"), temperature);
}

TrainConfig ExperimentConfig::train_config() const {
  require("estimator.kind");
  TrainConfig config;
  config.arm = trainer_arm_from_string(get("estimator.kind"));
  const std::string reward = get("estimator.reward");
  if (reward == "verifree") {
    config.scoring = AnswerScoring::Reference;
  } else if (reward == "verifree-equiv") {
    config.scoring = AnswerScoring::EquivalenceClass;
  } else {
    throw ConfigError("estimator.reward: unknown value \"" + reward +
                      "\" (known: verifree, verifree-equiv)");
  }
  config.clip_eps = get_double("estimator.clip_eps");
  config.group_size = get_int("rollout.group_size");
  config.steps = get_int("trainer.steps");
  config.learning_rate = get_double("trainer.lr");
  config.prompts_per_step = get_int("trainer.prompts_per_step");
  const std::string optimizer = get("trainer.optimizer");
  if (optimizer == "adam") {
    config.optimizer = OptimizerKind::AdamLike;
  } else if (optimizer == "sgd") {
    config.optimizer = OptimizerKind::Sgd;
  } else {
    throw ConfigError("trainer.optimizer: unknown value \"" + optimizer +
                      "\" (known: adam, sgd)");
  }
  config.eval_every = get_int("trainer.eval_every");
  config.reuse_epochs = get_int("trainer.reuse_epochs");
  config.seed = get_u64("trainer.seed");
  config.temperature = get_double("policy.temperature");
  config.holdout_instances = get_int("task.holdout");
  config.validate();
  return config;
}

std::vector<TrainerArm> ExperimentConfig::compare_arms() const {
  std::vector<TrainerArm> arms;
  for (const std::string& name : split_list(get("compare.arms"))) {
    arms.push_back(trainer_arm_from_string(name));
  }
  if (arms.empty()) throw ConfigError("compare.arms must name at least one arm");
  return arms;
}

std::vector<std::uint64_t> ExperimentConfig::compare_seeds() const {
  std::vector<std::uint64_t> seeds;
  for (const std::string& token : split_list(get("compare.seeds"))) {
    try {
      seeds.push_back(std::stoull(token));
    } catch (const std::exception&) {
      throw ConfigError("compare.seeds: expected integers, got \"" + token + "\"");
    }
  }
  if (seeds.empty()) throw ConfigError("compare.seeds must name at least one seed");
  return seeds;
}

}  // namespace verifree
