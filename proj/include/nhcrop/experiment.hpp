#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nhcrop/cost_belief.hpp"
#include "nhcrop/demand_model.hpp"
#include "nhcrop/environment.hpp"
#include "nhcrop/evaluation.hpp"
#include "nhcrop/policies.hpp"
#include "nhcrop/runner.hpp"

namespace nhcrop {

const std::vector<std::string>& preset_names();
// Environment of a named preset with its asset table built. Throws
// ConfigError for unknown names.
std::shared_ptr<EnvironmentConfig> make_preset(const std::string& name);

struct ExperimentConfig {
  std::vector<std::shared_ptr<const EnvironmentConfig>> settings;
  std::vector<std::string> methods;
  PolicySpec policy;
  DemandParams demand;
  SignalNoiseParams belief;
  std::vector<std::int64_t> seeds;
  std::vector<std::int64_t> validation_seeds;
  std::vector<double> clip_grid{0.1, 0.2, 0.3, 0.5, 0.8, 1.2};
  bool tune_clip = true;
  std::string output_dir;
  int parallelism = 1;
  bool round_level = true;

  // Throws ConfigError.
  void validate() const;
};

// Five presets, the default roster, seeds 0..29 and validation seeds 1000..1004.
ExperimentConfig default_config(bool with_oracles);

// JSON text of the config file. Relative asset table paths resolve against
// `base_dir`. Throws ConfigError on malformed input and DataError when an
// asset table cannot be read.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// Parses "0,1,5" or "0:30" (start:count).
std::vector<std::int64_t> parse_seed_list(const std::string& text);

RunSpec make_run_spec(const ExperimentConfig& cfg, const std::shared_ptr<const EnvironmentConfig>& env,
                      const std::string& method_id, double q_max);

// Runs fn(i) for i in [0, n) on `workers` threads and hands each result to
// consume(i, result) in index order on the calling thread. The first failure
// in index order is rethrown.
template <typename Result, typename Fn, typename Consume>
void ordered_parallel(std::size_t n, int workers, Fn fn, Consume consume) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) consume(i, fn(i));
    return;
  }
  std::vector<std::optional<Result>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<char> done(n, 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      std::optional<Result> r;
      std::exception_ptr err;
      if (!abort) {
        try {
          r.emplace(fn(i));
        } catch (...) {
          err = std::current_exception();
          abort = true;
        }
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        slots[i] = std::move(r);
        errors[i] = err;
        done[i] = 1;
      }
      cv.notify_all();
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w) pool.emplace_back(work);
  std::exception_ptr failure;
  for (std::size_t i = 0; i < n && !failure; ++i) {
    std::optional<Result> r;
    {
      std::unique_lock<std::mutex> lock(mu);
      cv.wait(lock, [&] { return done[i] != 0; });
      failure = errors[i];
      r = std::move(slots[i]);
      slots[i].reset();
    }
    if (failure) break;
    if (!r) {
      // Skipped after a later-index failure; report that one.
      abort = true;
      continue;
    }
    try {
      consume(i, std::move(*r));
    } catch (...) {
      failure = std::current_exception();
      abort = true;
    }
  }
  for (auto& t : pool) t.join();
  if (!failure) {
    for (auto& e : errors) {
      if (e) {
        failure = e;
        break;
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

struct ClipTuning {
  std::map<double, double> validation_mean_reward;  // per round, over clipped methods and settings
  double selected = 0.8;
};

// Shared q_max from the validation seeds; the configured q_max when tuning is
// off or the roster has no clipped method.
ClipTuning tune_clip(const ExperimentConfig& cfg);

struct AuditResult {
  ClipTuning clip;
  SummaryTable summary;
  std::vector<BucketReport> buckets;
  std::vector<VerificationEvent> events;
};

enum class AuditOutputs { Full, Stratify, RoiAudit };

// Every (setting, method, seed) cell; writes the CSV tree under output_dir.
AuditResult run_audit(const ExperimentConfig& cfg, AuditOutputs outputs = AuditOutputs::Full);

enum class SweepAxis { Clip, SigmaCoarse, CVer, Tau };
SweepAxis parse_sweep_axis(const std::string& text);
std::string_view to_string(SweepAxis axis);

struct SweepRow {
  std::string setting_id;
  double value = 0.0;
  std::string method_id;
  double mean_reward = 0.0;
  double cum_reward_mean = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<double> selected_clip;
};

// Validation-seed runs per value; writes tables/sweep_<axis>.csv and, with
// round_level, raw/sweep_<axis>_rounds.csv.
SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values);

}  // namespace nhcrop
