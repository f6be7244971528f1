#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nhcrop/core_types.hpp"
#include "nhcrop/cost_belief.hpp"
#include "nhcrop/demand_model.hpp"
#include "nhcrop/environment.hpp"
#include "nhcrop/policies.hpp"

namespace nhcrop {

// Everything that defines one (setting, method) cell apart from the seed.
struct RunSpec {
  std::shared_ptr<const EnvironmentConfig> env;
  std::string method_id;
  PolicySpec policy;
  DemandParams demand;       // q_max applies only when policy.clipped
  SignalNoiseParams belief;  // sigma_coarse / sigma_refined are taken from env
  bool counterfactuals = true;  // one-round no-verification replay of each verified round
  bool info_values = true;      // decision-value diagnostic per round
};

// Copyable state of one run before any round; counterfactual replays clone it.
struct RunState {
  Environment env;
  DemandModel model;
  BeliefStore beliefs;
};

enum class RoundMode { Policy, ForceNoVerify, ForceVerify };

// Executes the interaction protocol round by round.
class Runner {
 public:
  Runner(RunSpec spec, std::int64_t seed);

  RunState initial_state() const;
  const RunSpec& spec() const { return spec_; }
  const SignalNoiseParams& noise() const { return noise_; }
  std::int64_t seed() const { return seed_; }

  // Plays one round on `state`. `schedule` supplies the verify flag of replay
  // oracles; `mode` forces the verification branch for hindsight passes.
  RoundRecord play(RunState& state, const RoundEvent& event, RoundMode mode = RoundMode::Policy,
                   std::optional<bool> scheduled_verify = std::nullopt) const;

  // Full single-pass run. Replay oracles need `schedule` (one flag per round).
  Trajectory run(const std::vector<char>* schedule = nullptr) const;

 private:
  RunSpec spec_;
  std::int64_t seed_;
  SignalNoiseParams noise_;
  PolicyStreams streams_;
};

// Runs any method, including the two-pass replay oracles.
Trajectory run_trajectory(const RunSpec& spec, std::int64_t seed);

}  // namespace nhcrop
