#include "nhcrop/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nhcrop {

bool is_oracle(PolicyKind kind) {
  return kind == PolicyKind::OracleFree || kind == PolicyKind::OraclePositiveROI ||
         kind == PolicyKind::OraclePriceChangePositive;
}

void PolicySpec::validate() const {
  if (!(lambda_risk >= 0.0)) throw std::invalid_argument("lambda_risk must be >= 0");
  if (std::isnan(gamma_margin)) throw std::invalid_argument("gamma_margin is NaN");
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
  if (std::isnan(tpiv_threshold)) throw std::invalid_argument("tpiv_threshold is NaN");
  if (!(random_verify_prob >= 0.0 && random_verify_prob <= 1.0)) {
    throw std::invalid_argument("random_verify_prob must lie in [0,1]");
  }
}

const std::vector<std::string>& method_ids() {
  static const std::vector<std::string> ids = {
      "price_only",  "price_only_clip", "risk_averse",   "risk_averse_clip", "tpiv",
      "nhcrop",      "nhcrop_clip",     "nhcrop_clip_nov", "nhcrop_nov",     "always_verify",
      "random_verify", "oracle_free",   "oracle_pos_roi", "oracle_price_change"};
  return ids;
}

std::vector<std::string> default_methods(bool with_oracles) {
  std::vector<std::string> out;
  for (const auto& id : method_ids()) {
    if (!with_oracles && id.rfind("oracle_", 0) == 0) continue;
    out.push_back(id);
  }
  return out;
}

PolicySpec spec_for_method(std::string_view id, const PolicySpec& base) {
  PolicySpec s = base;
  s.clipped = false;
  s.verification_enabled = true;
  if (id == "price_only" || id == "price_only_clip") {
    s.kind = PolicyKind::PriceOnly;
    s.clipped = id == "price_only_clip";
  } else if (id == "risk_averse" || id == "risk_averse_clip") {
    s.kind = PolicyKind::RiskAverse;
    s.clipped = id == "risk_averse_clip";
  } else if (id == "tpiv") {
    s.kind = PolicyKind::TPIV;
  } else if (id == "nhcrop" || id == "nhcrop_clip" || id == "nhcrop_clip_nov" || id == "nhcrop_nov") {
    s.kind = PolicyKind::NHCROP;
    s.clipped = id == "nhcrop_clip" || id == "nhcrop_clip_nov";
    s.verification_enabled = id == "nhcrop" || id == "nhcrop_clip";
  } else if (id == "always_verify") {
    s.kind = PolicyKind::AlwaysVerify;
  } else if (id == "random_verify") {
    s.kind = PolicyKind::RandomVerify;
  } else if (id == "oracle_free") {
    s.kind = PolicyKind::OracleFree;
  } else if (id == "oracle_pos_roi") {
    s.kind = PolicyKind::OraclePositiveROI;
  } else if (id == "oracle_price_change") {
    s.kind = PolicyKind::OraclePriceChangePositive;
  } else {
    throw std::invalid_argument("unknown method '" + std::string(id) + "'");
  }
  return s;
}

PolicyStreams PolicyStreams::for_run(std::string_view setting_id, std::int64_t seed) {
  const CounterRng run = CounterRng::for_run(setting_id, static_cast<std::uint64_t>(seed));
  return {run.derive("mc"), run.derive("policy")};
}

PriceScore value_direct(const PricingView& view, const CostBelief& belief) {
  return view.model.best_price(view.ctx, view.asset, view.grid, belief.mu);
}

double risk_proxy(const CostBelief& belief, double lambda_risk) {
  return std::clamp(belief.mu + lambda_risk * belief.sigma, 0.0, 1.0);
}

PriceScore value_risk(const PricingView& view, const CostBelief& belief, double lambda_risk) {
  return view.model.best_price(view.ctx, view.asset, view.grid, risk_proxy(belief, lambda_risk));
}

double value_verify_mc(const PricingView& view, const CostBelief& belief, const SignalNoiseParams& params, int mc_samples,
                       double c_ver, const CounterRng& mc_stream, int round) {
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
  const RefinedSignalDistribution dist = refined_signal_distribution(belief, params);
  // Running mean stays exact when every sample value is identical.
  double mean = 0.0;
  for (int k = 0; k < mc_samples; ++k) {
    const double s = dist.sample(mc_stream, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(k));
    const double best = view.model.best_price(view.ctx, view.asset, view.grid, s).score;
    mean += (best - mean) / static_cast<double>(k + 1);
  }
  return mean - c_ver;
}

namespace {

Plan direct_plan(const PriceScore& direct, double mu, const ActionValues& values) {
  return {false, ActionKind::Direct, direct.price, mu, values};
}

Plan verify_plan(const ActionValues& values) {
  Plan plan;
  plan.verify = true;
  plan.action_kind = ActionKind::VerifyThenPrice;
  plan.values = values;
  return plan;
}

// Better of direct and risk-aware pricing; exact ties stay direct.
Plan fallback_plan(const CostBelief& belief, const PolicySpec& spec, const PriceScore& direct, const PriceScore& risk,
                   const ActionValues& values) {
  if (!spec.disable_risk_fallback && risk.score > direct.score) {
    return {false, ActionKind::Risk, risk.price, risk_proxy(belief, spec.lambda_risk), values};
  }
  return direct_plan(direct, belief.mu, values);
}

}  // namespace

bool verify_gate(const ActionValues& values, double gamma_margin, bool disable_risk_fallback) {
  if (!values.v_verify) return false;
  const double best_no_verify = disable_risk_fallback ? values.v_direct : std::max(values.v_direct, values.v_risk);
  return *values.v_verify > best_no_verify + gamma_margin;
}

Plan nh_crop_decide(const PricingView& view, const CostBelief& belief, const PolicySpec& spec,
                    const SignalNoiseParams& params, double c_ver, const PolicyStreams& streams, int round) {
  if (spec.kind != PolicyKind::NHCROP) throw std::invalid_argument("nh_crop_decide needs an NHCROP spec");
  const PriceScore direct = value_direct(view, belief);
  const PriceScore risk = value_risk(view, belief, spec.lambda_risk);
  ActionValues values{direct.score, risk.score, std::nullopt};
  if (spec.verification_enabled) {
    values.v_verify = value_verify_mc(view, belief, params, spec.mc_samples, c_ver, streams.mc, round);
    if (verify_gate(values, spec.gamma_margin, spec.disable_risk_fallback)) return verify_plan(values);
  }
  return fallback_plan(belief, spec, direct, risk, values);
}

Plan baseline_decide(const PricingView& view, const CostBelief& belief, const PolicySpec& spec,
                     const SignalNoiseParams& params, double c_ver, const PolicyStreams& streams, int round,
                     const HindsightContext* hindsight) {
  (void)params;
  (void)c_ver;
  if (spec.kind == PolicyKind::NHCROP) throw std::invalid_argument("baseline_decide called with an NHCROP spec");
  const PriceScore direct = value_direct(view, belief);
  const PriceScore risk = value_risk(view, belief, spec.lambda_risk);
  const ActionValues values{direct.score, risk.score, std::nullopt};

  switch (spec.kind) {
    case PolicyKind::PriceOnly:
      return direct_plan(direct, belief.mu, values);
    case PolicyKind::RiskAverse:
      return {false, ActionKind::Risk, risk.price, risk_proxy(belief, spec.lambda_risk), values};
    case PolicyKind::TPIV:
      return belief.sigma > spec.tpiv_threshold ? verify_plan(values) : direct_plan(direct, belief.mu, values);
    case PolicyKind::AlwaysVerify:
      return verify_plan(values);
    case PolicyKind::RandomVerify: {
      const bool fire = streams.policy.uniform(static_cast<std::uint64_t>(round), 0) < spec.random_verify_prob;
      return fire ? verify_plan(values) : direct_plan(direct, belief.mu, values);
    }
    case PolicyKind::OracleFree: {
      if (!hindsight || !hindsight->true_cost) throw std::invalid_argument("oracle requires replay context");
      const double c = *hindsight->true_cost;
      const PriceScore informed = view.model.best_price(view.ctx, view.asset, view.grid, c);
      return {false, ActionKind::Direct, informed.price, c, values};
    }
    case PolicyKind::OraclePositiveROI:
    case PolicyKind::OraclePriceChangePositive:
      if (!hindsight || !hindsight->verify_this_round) throw std::invalid_argument("oracle requires replay context");
      return *hindsight->verify_this_round ? verify_plan(values) : direct_plan(direct, belief.mu, values);
    case PolicyKind::NHCROP:
      break;
  }
  throw std::invalid_argument("unhandled policy kind");
}

Plan decide(const PricingView& view, const CostBelief& belief, const PolicySpec& spec, const SignalNoiseParams& params,
            double c_ver, const PolicyStreams& streams, int round, const HindsightContext* hindsight) {
  if (spec.kind == PolicyKind::NHCROP) return nh_crop_decide(view, belief, spec, params, c_ver, streams, round);
  return baseline_decide(view, belief, spec, params, c_ver, streams, round, hindsight);
}

Plan no_verify_plan(const PricingView& view, const CostBelief& belief, const PolicySpec& spec,
                    const HindsightContext* hindsight) {
  const PriceScore direct = value_direct(view, belief);
  const PriceScore risk = value_risk(view, belief, spec.lambda_risk);
  const ActionValues values{direct.score, risk.score, std::nullopt};
  switch (spec.kind) {
    case PolicyKind::NHCROP:
      return fallback_plan(belief, spec, direct, risk, values);
    case PolicyKind::RiskAverse:
      return {false, ActionKind::Risk, risk.price, risk_proxy(belief, spec.lambda_risk), values};
    case PolicyKind::OracleFree: {
      if (!hindsight || !hindsight->true_cost) throw std::invalid_argument("oracle requires replay context");
      const PriceScore informed = view.model.best_price(view.ctx, view.asset, view.grid, *hindsight->true_cost);
      return {false, ActionKind::Direct, informed.price, *hindsight->true_cost, values};
    }
    default:
      return direct_plan(direct, belief.mu, values);
  }
}

Decision price_after_verification(const PricingView& view, const CostBelief& refined_belief) {
  const PriceScore refined = view.model.best_price(view.ctx, view.asset, view.grid, refined_belief.mu);
  return {true, ActionKind::VerifyThenPrice, refined.price, refined_belief.mu};
}

Decision to_decision(const Plan& plan) { return {plan.verify, plan.action_kind, plan.price, plan.cost_proxy}; }

}  // namespace nhcrop
