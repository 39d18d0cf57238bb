#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmrl/errors.hpp"
#include "gmrl/harness/config.hpp"
#include "gmrl/harness/metrics.hpp"

namespace gmrl::harness {

/// Final-window reward per seed for one completed run.
struct RunRecord {
  std::string name;
  std::string env;
  std::map<std::uint64_t, double> final_reward;
};

struct ComparisonEntry {
  std::string name;
  std::map<std::uint64_t, double> final_reward;    // matched seeds only
  std::map<std::uint64_t, double> percent_change;
  double mean_percent_change = 0.0;                // mean of the per-seed values
  double mean_final_reward = 0.0;
};

struct ComparisonTable {
  RunRecord baseline;
  std::vector<ComparisonEntry> entries;
};

/// (candidate - baseline) / |baseline| * 100.
inline double percent_change(double baseline, double candidate) {
  if (baseline == 0.0) throw DomainError("percent_change: baseline reward is zero");
  return (candidate - baseline) / std::fabs(baseline) * 100.0;
}

inline RunRecord record_from_rows(const std::string& name, const std::string& env,
                                  const std::vector<MetricsRow>& rows, double final_window) {
  RunRecord rec{name, env, {}};
  std::map<std::uint64_t, std::vector<double>> by_seed;
  for (const auto& r : rows) by_seed[r.seed].push_back(r.reward);
  for (const auto& [seed, rewards] : by_seed) rec.final_reward[seed] = final_window_mean(rewards, final_window);
  return rec;
}

/// Reads run.json and metrics.csv from a training output directory.
inline RunRecord load_run(const std::filesystem::path& dir) {
  const auto run_json = dir / "run.json";
  const auto csv = dir / "metrics.csv";
  if (!std::filesystem::exists(run_json) || !std::filesystem::exists(csv)) {
    throw IoError("'" + dir.string() + "' is not a completed run (needs run.json and metrics.csv)");
  }
  const json cfg = read_json_file(run_json.string());
  const std::string env = cfg.value("env", "");
  const std::string name = cfg.value("run_name", dir.filename().string());
  const double window = cfg.value("final_window", 0.1);
  RunRecord rec = record_from_rows(name, env, read_csv(csv.string()), window);
  if (rec.final_reward.empty()) throw ValidationError("'" + dir.string() + "' has no metric rows");
  return rec;
}

/// Percent change of each candidate's final reward against the baseline,
/// per seed present in both runs and as the mean over those seeds.
inline ComparisonTable compare(const RunRecord& baseline, const std::vector<RunRecord>& candidates) {
  if (candidates.empty()) throw ValidationError("compare: need at least one run besides the baseline");
  ComparisonTable table{baseline, {}};
  for (const auto& c : candidates) {
    if (c.env != baseline.env) {
      throw ValidationError("compare: run '" + c.name + "' uses env '" + c.env + "', baseline uses '" + baseline.env + "'");
    }
    ComparisonEntry e;
    e.name = c.name;
    double pct = 0.0, reward = 0.0;
    for (const auto& [seed, value] : c.final_reward) {
      auto it = baseline.final_reward.find(seed);
      if (it == baseline.final_reward.end()) continue;
      e.final_reward[seed] = value;
      e.percent_change[seed] = percent_change(it->second, value);
      pct += e.percent_change[seed];
      reward += value;
    }
    if (e.percent_change.empty()) throw ValidationError("compare: run '" + c.name + "' shares no seeds with the baseline");
    const double n = static_cast<double>(e.percent_change.size());
    e.mean_percent_change = pct / n;
    e.mean_final_reward = reward / n;
    table.entries.push_back(std::move(e));
  }
  return table;
}

inline std::string format_table(const ComparisonTable& t) {
  std::string out = "run,seed,final_reward,baseline_reward,percent_change\n";
  for (const auto& e : t.entries) {
    for (const auto& [seed, pct] : e.percent_change) {
      out += e.name + ',' + std::to_string(seed) + ',' + format_number(e.final_reward.at(seed)) + ',' + format_number(t.baseline.final_reward.at(seed)) + ',' + format_number(pct) + '\n';
    }
    out += e.name + ",mean," + format_number(e.mean_final_reward) + ",," + format_number(e.mean_percent_change) + '\n';
  }
  return out;
}

}  // namespace gmrl::harness
