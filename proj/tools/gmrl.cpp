#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmrl/harness/compare.hpp"
#include "gmrl/harness/config.hpp"
#include "gmrl/harness/runner.hpp"

namespace {

using namespace gmrl;
using namespace gmrl::harness;

int cmd_train(const std::string& config, const std::vector<std::string>& overrides,
              std::optional<std::uint64_t> seed) {
  const RunConfig cfg = load_config(config, overrides, seed);
  const TrainingResult res = run_training(cfg);
  for (const auto& s : res.seeds) {
    std::cout << "seed " << s.seed << ": ";
    if (s.failed) {
      std::cout << "FAILED (" << s.error << ")\n";
    } else {
      std::cout << s.rows.size() << " rows, final-window reward " << format_number(s.final_window_reward) << '\n';
    }
  }
  std::cout << cfg.run_name << " final reward " << format_mean_std(res.summary) << " over " << res.summary.n
            << " seed(s)";
  if (!cfg.output_dir.empty()) std::cout << ", written to " << cfg.output_dir;
  std::cout << '\n';
  return res.summary.n == res.seeds.size() ? 0 : 3;
}

int cmd_eval(const std::string& config, const std::string& checkpoint, const std::vector<std::string>& overrides,
             std::optional<std::size_t> episodes) {
  const RunConfig cfg = load_config(config, overrides);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const EvalResult res = evaluate(cfg, ck, episodes);
  std::cout << eval_to_json(res).dump(2) << '\n';
  return 0;
}

int cmd_compare(const std::string& baseline, const std::vector<std::string>& dirs) {
  const RunRecord base = load_run(baseline);
  std::vector<RunRecord> runs;
  for (const auto& d : dirs) runs.push_back(load_run(d));
  std::cout << format_table(compare(base, runs));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient Monitoring reinforcement-learning harness"};
  app.require_subcommand(1);

  std::string config, checkpoint, baseline;
  std::vector<std::string> overrides, dirs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;

  auto* train = app.add_subcommand("train", "train every configured seed and write metrics");
  train->add_option("--config", config, "JSON run configuration")->required();
  train->add_option("--seed", seed, "train this seed only (replaces the configured list)");
  train->add_option("--override", overrides, "key.path=value; applied after the file, in order")->allow_extra_args(false);

  auto* eval = app.add_subcommand("eval", "roll out a checkpoint without learning");
  eval->add_option("--config", config, "JSON run configuration")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  eval->add_option("--episodes", episodes, "number of evaluation episodes (default from config)");
  eval->add_option("--override", overrides, "key.path=value")->allow_extra_args(false);

  auto* cmp = app.add_subcommand("compare", "percent change of final reward against a baseline run");
  cmp->add_option("--baseline", baseline, "baseline run directory")->required();
  cmp->add_option("dirs", dirs, "run directories to compare")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(config, overrides, seed);
    if (*eval) return cmd_eval(config, checkpoint, overrides, episodes);
    if (*cmp) return cmd_compare(baseline, dirs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
