#include "verifree/cli_app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "verifree/config.hpp"
#include "verifree/errors.hpp"
#include "verifree/estimators.hpp"
#include "verifree/fixtures.hpp"
#include "verifree/oracle.hpp"
#include "verifree/patchtok.hpp"
#include "verifree/trainer.hpp"
#include "verifree/version.hpp"

namespace verifree {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct RunContext {
  ExperimentConfig config;
  fs::path out_dir;
  int workers = 1;
  std::uint64_t seed = 0;
};

std::string header_comment(const RunContext& ctx) {
  return "# verifree-lab v" VERIFREE_LAB_VERSION " config_hash=" + ctx.config.hash() +
         " seed=" + std::to_string(ctx.seed);
}

ordered_json header_object(const RunContext& ctx) {
  ordered_json header;
  header["type"] = "header";
  header["version"] = VERIFREE_LAB_VERSION;
  header["config_hash"] = ctx.config.hash();
  header["seed"] = ctx.seed;
  ordered_json resolved;
  std::istringstream lines(ctx.config.canonical_text());
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) resolved[line.substr(0, eq)] = line.substr(eq + 3);
  }
  header["config"] = resolved;
  return header;
}

std::ofstream open_output(const RunContext& ctx, const std::string& filename) {
  fs::create_directories(ctx.out_dir);
  const fs::path path = ctx.out_dir / filename;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file: " + path.string());
  return out;
}

void write_metrics_line(std::ostream& out, const std::string& arm, std::uint64_t seed,
                        const StepMetrics& m) {
  ordered_json row;
  row["type"] = "step";
  row["arm"] = arm;
  row["seed"] = seed;
  row["step"] = m.step;
  row["reward_kind"] = m.reward_kind;
  row["reward_mean"] = m.reward_mean;
  row["confidence_mean"] = m.confidence_mean;
  row["trace_length_mean"] = m.trace_length_mean;
  row["group_reward_variance"] = m.group_reward_variance;
  row["grad_norm"] = m.grad_norm;
  row["clip_fraction"] = m.clip_fraction;
  if (m.exact_objective) row["exact_objective"] = *m.exact_objective;
  if (m.holdout_accuracy) row["holdout_accuracy"] = *m.holdout_accuracy;
  if (m.holdout_confidence) row["holdout_confidence"] = *m.holdout_confidence;
  out << row.dump() << "\n";
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

// ---- check ----------------------------------------------------------------

int run_check(const RunContext& ctx) {
  const int count = ctx.config.get_int("check.count");
  const std::uint64_t seed = ctx.config.get_u64("check.seed");
  bool ok = true;
  auto report = [&](const std::string& name, double worst, double tol) {
    const bool pass = worst < tol;
    ok = ok && pass;
    std::cout << (pass ? "[ok]   " : "[FAIL] ") << name << ": max error " << format_double(worst)
              << " (tolerance " << format_double(tol) << ")\n";
  };

  double worst_closure = 0.0;
  double worst_equiv = 0.0;
  double worst_rb = 0.0;
  double worst_score = 0.0;
  GradCheckReport worst_grad;
  for (int i = 0; i < count; ++i) {
    const Fixture unique = make_fixture(i, seed, /*unique_answer=*/true);

    // trace mass closure
    double mass = 0.0;
    for (const TokenSeq& trace :
         enumerate_traces(unique.task.vocab, unique.task.trace_budget)) {
      mass += std::exp(logprob(unique.policy, unique.task.prompt, trace));
    }
    worst_closure = std::max(worst_closure, std::abs(mass - 1.0));

    // objective equivalence on unique-answer tasks
    const double j_verifier = exact_objective(unique.policy, unique.task, ObjectiveMode::Verifier);
    const double j_verifree = exact_objective(unique.policy, unique.task, ObjectiveMode::VeriFree);
    worst_equiv = std::max(worst_equiv, std::abs(j_verifier - j_verifree));

    // per-trace conditional expectation of the verifier estimate equals the
    // verifier-free estimate
    const Fixture fixture = make_fixture(i, seed);
    const auto traces = enumerate_traces(fixture.task.vocab, fixture.task.trace_budget);
    const TokenSeq& trace = traces[traces.size() / 2];
    worst_rb = std::max(
        worst_rb, (conditional_verifier_expectation(fixture.policy, fixture.task, trace) -
                   estimate_verifree(fixture.policy, fixture.task, trace).vector)
                      .cwiseAbs()
                      .maxCoeff());

    // expected score is zero at every context reached from the prompt
    TokenSeq history = fixture.task.prompt;
    ParamVec expected = ParamVec::Zero(fixture.policy.param_count());
    const Eigen::VectorXd probs = fixture.policy.next_logprobs(history).array().exp();
    for (TokenId t = 0; t < fixture.task.vocab.size; ++t) {
      fixture.policy.accumulate_score(history, t, probs[t], expected);
    }
    worst_score = std::max(worst_score, expected.cwiseAbs().maxCoeff());

    if (i < 3) {  // finite differences are the slow part; a few fixtures suffice here
      const GradCheckReport grad_report = check_gradients(fixture.policy, fixture.task);
      worst_grad.logprob_max_rel_error =
          std::max(worst_grad.logprob_max_rel_error, grad_report.logprob_max_rel_error);
      worst_grad.objective_verifier_max_rel_error =
          std::max(worst_grad.objective_verifier_max_rel_error,
                   grad_report.objective_verifier_max_rel_error);
      worst_grad.objective_verifree_max_rel_error =
          std::max(worst_grad.objective_verifree_max_rel_error,
                   grad_report.objective_verifree_max_rel_error);
    }
  }
  report("trace probability closure", worst_closure, 1e-12);
  report("objective equivalence (unique answers)", worst_equiv, 1e-12);
  report("answer-marginalization identity", worst_rb, 1e-10);
  report("expected score is zero", worst_score, 1e-10);
  report("logprob gradient vs finite differences", worst_grad.logprob_max_rel_error, 1e-5);
  report("verifier oracle gradient vs finite differences",
         worst_grad.objective_verifier_max_rel_error, 1e-5);
  report("verifier-free oracle gradient vs finite differences",
         worst_grad.objective_verifree_max_rel_error, 1e-5);
  return ok ? kExitOk : kExitNumericalCheckFailure;
}

// ---- variance --------------------------------------------------------------

int run_variance(const RunContext& ctx) {
  const int count = ctx.config.get_int("variance.count");
  const std::uint64_t seed = ctx.config.get_u64("variance.seed");
  std::ofstream out = open_output(ctx, ctx.config.get("output.report"));
  out << header_comment(ctx) << "\n";
  out << "task_id,policy_seed,var_verifier,var_verifree,gap,decomposition_inner,inequality_ok\n";
  bool all_ok = true;
  for (int i = 0; i < count; ++i) {
    const Fixture fixture = make_fixture(i, seed);
    VarianceReport report = exact_estimator_covariance(fixture.policy, fixture.task);
    report.policy_seed = fixture.policy_seed;
    const bool row_ok = report.inequality_ok() &&
                        std::abs(report.gap() - report.decomposition_inner) < 1e-10;
    all_ok = all_ok && row_ok;
    out << report.task_id << "," << report.policy_seed << ","
        << format_double(report.var_verifier_trace) << ","
        << format_double(report.var_verifree_trace) << "," << format_double(report.gap()) << ","
        << format_double(report.decomposition_inner) << "," << (row_ok ? "true" : "false")
        << "\n";
  }
  std::cout << "variance sweep over " << count << " fixtures: "
            << (all_ok ? "inequality holds on every row" : "INEQUALITY VIOLATED") << "\n";
  return all_ok ? kExitOk : kExitNumericalCheckFailure;
}

// ---- train ------------------------------------------------------------------

int run_train(const RunContext& ctx) {
  TrainConfig config = ctx.config.train_config();
  config.seed = ctx.seed;
  config.workers = ctx.workers;
  const TaskFamily family = ctx.config.task_family();
  TrainResult result = train(config, family, ctx.config.initial_policy());

  std::ofstream out = open_output(ctx, ctx.config.get("output.metrics"));
  out << header_object(ctx).dump() << "\n";
  for (const StepMetrics& metrics : result.metrics) {
    write_metrics_line(out, to_string(config.arm), config.seed, metrics);
  }
  const double objective =
      family_exact_objective(result.policy, family, config.holdout_instances);
  std::cout << "trained " << to_string(config.arm) << " for " << config.steps
            << " steps; final exact objective " << format_double(objective) << "\n";
  return kExitOk;
}

// ---- compare ----------------------------------------------------------------

int run_compare(const RunContext& ctx) {
  TrainConfig base = ctx.config.train_config();
  base.workers = ctx.workers;
  const TaskFamily family = ctx.config.task_family();
  const double threshold = ctx.config.get_double("compare.threshold");
  const std::vector<CompareArmResult> rows = compare_estimators(
      base, family, ctx.config.initial_policy(), ctx.config.compare_arms(),
      ctx.config.compare_seeds(), threshold);

  std::ofstream metrics_out = open_output(ctx, ctx.config.get("output.compare_metrics"));
  metrics_out << header_object(ctx).dump() << "\n";
  std::ofstream summary = open_output(ctx, ctx.config.get("output.report"));
  summary << header_comment(ctx) << "\n";
  summary << "arm,seed,final_objective,steps_to_threshold\n";
  for (const CompareArmResult& row : rows) {
    for (const StepMetrics& metrics : row.metrics) {
      write_metrics_line(metrics_out, row.arm, row.seed, metrics);
    }
    summary << row.arm << "," << row.seed << "," << format_double(row.final_objective) << ","
            << (row.steps_to_threshold ? std::to_string(*row.steps_to_threshold) : "never")
            << "\n";
    std::cout << row.arm << " seed " << row.seed << ": final objective "
              << format_double(row.final_objective) << ", steps to " << threshold << ": "
              << (row.steps_to_threshold ? std::to_string(*row.steps_to_threshold) : "never")
              << "\n";
  }
  return kExitOk;
}

// ---- patch-demo ---------------------------------------------------------------

int run_patch_demo(const RunContext& ctx) {
  const ToyTokenizer tok = ToyTokenizer::fixture();
  const std::vector<std::string> fixtures = {
      "the sum is four<answer>4 </answer>",
      "count them<answer>42 </answer>",
      "they sum to seven<answer>7 </answer>",   // '>'+'7' merges: text split drifts
      "no marker here at all",
  };

  std::ofstream out = open_output(ctx, "patch_demo.txt");
  out << header_comment(ctx) << "\n";
  auto show = [&](std::ostream& os) {
    os << "merge-based splitting at the \"" << tok.boundary_string()
       << "\" token vs splitting the text at \"" << tok.boundary_string() << tok.closing_char()
       << "\"\n";
    for (const std::string& text : fixtures) {
      const TokenSeq full = tok.tokenize(text);
      const SplitResponse token_split = split_at_boundary(tok, full);
      const SplitResponse text_split = split_at_text(tok, full);
      auto render = [&](const TokenSeq& tokens) {
        std::string s;
        for (TokenId t : tokens) s += "[" + tok.token_string(t) + "]";
        return s;
      };
      TokenSeq text_joined = text_split.trace_tokens;
      text_joined.insert(text_joined.end(), text_split.answer_region_tokens.begin(),
                         text_split.answer_region_tokens.end());
      const bool drift = text_split.format_ok && text_joined != full;
      os << "\ninput: " << text << "\n";
      os << "  full tokens:  " << render(full) << "\n";
      os << "  token split:  trace " << render(token_split.trace_tokens) << " | answer "
         << render(token_split.answer_region_tokens)
         << (token_split.format_ok ? "" : "  (format broken)") << "\n";
      os << "  text split:   trace " << render(text_split.trace_tokens) << " | answer "
         << render(text_split.answer_region_tokens)
         << (text_split.format_ok ? "" : "  (no marker)") << (drift ? "  <-- DRIFT" : "") << "\n";
      if (token_split.format_ok) {
        const TokenSeq patched =
            patch_reference(tok, token_split, make_reference_region(tok, "7"));
        os << "  patched:      " << render(patched) << "\n";
      }
    }
  };
  show(out);
  show(std::cout);
  return kExitOk;
}

}  // namespace

int run_cli(const CliRequest& request) {
  try {
    RunContext ctx;
    ctx.config = request.config_path ? ExperimentConfig::from_file(*request.config_path)
                                     : ExperimentConfig();
    for (const std::string& assignment : request.overrides) {
      ctx.config.apply_override(assignment);
    }
    if (request.seed) ctx.config.set("trainer.seed", std::to_string(*request.seed));
    ctx.out_dir = request.out_dir;
    ctx.workers = request.workers > 0
                      ? request.workers
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    ctx.seed = ctx.config.get_u64("trainer.seed");

    if (request.subcommand == "check") return run_check(ctx);
    if (request.subcommand == "variance") return run_variance(ctx);
    if (request.subcommand == "train") return run_train(ctx);
    if (request.subcommand == "compare") return run_compare(ctx);
    if (request.subcommand == "patch-demo") return run_patch_demo(ctx);
    std::cerr << "unknown subcommand \"" << request.subcommand
              << "\" (known: check, variance, train, compare, patch-demo)\n";
    return kExitValidationFailure;
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << "\n";
    return kExitValidationFailure;
  } catch (const NumericalCheckError& error) {
    std::cerr << "numerical check failed: " << error.what() << "\n";
    return kExitNumericalCheckFailure;
  } catch (const TrainingDiverged& error) {
    std::cerr << error.what() << "\n";
    return kExitNumericalCheckFailure;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitValidationFailure;
  }
}

}  // namespace verifree
