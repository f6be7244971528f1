#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nhcrop/core_types.hpp"
#include "nhcrop/cost_belief.hpp"
#include "nhcrop/counter_rng.hpp"
#include "nhcrop/demand_model.hpp"

namespace nhcrop {

enum class PolicyKind {
  PriceOnly,
  RiskAverse,
  TPIV,
  NHCROP,
  AlwaysVerify,
  RandomVerify,
  OracleFree,
  OraclePositiveROI,
  OraclePriceChangePositive,
};

bool is_oracle(PolicyKind kind);

struct PolicySpec {
  PolicyKind kind = PolicyKind::PriceOnly;
  double lambda_risk = 1.0;
  double gamma_margin = 0.01;
  int mc_samples = 64;
  double tpiv_threshold = 0.15;
  double random_verify_prob = 0.1;
  bool clipped = false;
  bool verification_enabled = true;    // false is the no-verification ablation
  bool disable_risk_fallback = false;  // gate against the direct value only

  void validate() const;
};

// Fixed method identifiers used in every output file.
const std::vector<std::string>& method_ids();
// Default roster: every identifier except the hindsight oracles.
std::vector<std::string> default_methods(bool with_oracles);
// Spec of a named method, starting from the shared parameter defaults in
// `base` (clipped/kind/verification fields are overwritten).
PolicySpec spec_for_method(std::string_view method_id, const PolicySpec& base = {});

struct ActionValues {
  double v_direct = 0.0;
  double v_risk = 0.0;
  std::optional<double> v_verify;
};

// What a policy needs about the current round, all observable before pricing.
struct PricingView {
  const DemandModel& model;
  const TaskContext& ctx;
  const Asset& asset;
  const PriceGrid& grid;
};

// Hindsight available to oracle kinds only.
struct HindsightContext {
  std::optional<double> true_cost;          // free oracle
  std::optional<bool> verify_this_round;    // replay oracles
};

// Private random streams of one run, keyed so they never touch the
// environment's event channels.
struct PolicyStreams {
  CounterRng mc;
  CounterRng policy;

  static PolicyStreams for_run(std::string_view setting_id, std::int64_t seed);
};

PriceScore value_direct(const PricingView& view, const CostBelief& belief);
double risk_proxy(const CostBelief& belief, double lambda_risk);
PriceScore value_risk(const PricingView& view, const CostBelief& belief, double lambda_risk);
// (1/K) sum_k max_p R(p, s_k) - c_ver with s_k from the refined-signal
// predictive distribution, drawn from the run's MC stream at `round`.
double value_verify_mc(const PricingView& view, const CostBelief& belief, const SignalNoiseParams& params, int mc_samples,
                       double c_ver, const CounterRng& mc_stream, int round);

// V_ver > max(V_dir, V_risk) + gamma, or against V_dir alone without the risk
// fallback. False when v_verify is absent.
bool verify_gate(const ActionValues& values, double gamma_margin, bool disable_risk_fallback = false);

// Pre-verification plan of one round. When verify is set, price and
// cost_proxy are filled in by price_after_verification.
struct Plan {
  bool verify = false;
  ActionKind action_kind = ActionKind::Direct;
  double price = 0.0;
  double cost_proxy = 0.0;
  ActionValues values;
};

Plan nh_crop_decide(const PricingView& view, const CostBelief& belief, const PolicySpec& spec,
                    const SignalNoiseParams& params, double c_ver, const PolicyStreams& streams, int round);

// Throws std::invalid_argument("oracle requires replay context") for oracle
// kinds without hindsight.
Plan baseline_decide(const PricingView& view, const CostBelief& belief, const PolicySpec& spec,
                     const SignalNoiseParams& params, double c_ver, const PolicyStreams& streams, int round,
                     const HindsightContext* hindsight);

// Dispatches on spec.kind.
Plan decide(const PricingView& view, const CostBelief& belief, const PolicySpec& spec, const SignalNoiseParams& params,
            double c_ver, const PolicyStreams& streams, int round, const HindsightContext* hindsight);

// The action the policy posts when verification is ruled out this round.
Plan no_verify_plan(const PricingView& view, const CostBelief& belief, const PolicySpec& spec,
                    const HindsightContext* hindsight);

// Completes a verifying plan: price from the refined belief.
Decision price_after_verification(const PricingView& view, const CostBelief& refined_belief);

Decision to_decision(const Plan& plan);

}  // namespace nhcrop
