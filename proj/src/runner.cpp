#include "nhcrop/runner.hpp"

#include <stdexcept>

#include "nhcrop/errors.hpp"
#include "nhcrop/evaluation.hpp"

namespace nhcrop {

namespace {

SignalNoiseParams noise_for(const RunSpec& spec) {
  SignalNoiseParams p = spec.belief;
  p.sigma_coarse = spec.env->sigma_coarse;
  p.sigma_refined = spec.env->sigma_refined;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(spec.env->setting_id + ": " + e.what());
  }
  return p;
}

}  // namespace

Runner::Runner(RunSpec spec, std::int64_t seed)
    : spec_(std::move(spec)),
      seed_(seed),
      noise_(noise_for(spec_)),
      streams_(PolicyStreams::for_run(spec_.env->setting_id, seed)) {
  try {
    spec_.policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(spec_.method_id + ": " + e.what());
  }
}

RunState Runner::initial_state() const {
  DemandParams demand = spec_.demand;
  if (!spec_.policy.clipped) demand.q_max = kUnclipped;
  return RunState{Environment(spec_.env, seed_), DemandModel(spec_.env->n_task_kinds, demand), BeliefStore(noise_)};
}

RoundRecord Runner::play(RunState& st, const RoundEvent& event, RoundMode mode,
                         std::optional<bool> scheduled_verify) const {
  const EnvironmentConfig& cfg = st.env.config();
  const Observation obs = st.env.observe(event);
  const CostBelief belief = st.beliefs.lookup_or_init(obs.asset.asset_id, obs.coarse_cost);
  const PricingView view{st.model, obs.context, obs.asset, cfg.grid};

  HindsightContext hindsight;
  if (spec_.policy.kind == PolicyKind::OracleFree) hindsight.true_cost = st.env.oracle_true_cost(event);
  hindsight.verify_this_round = scheduled_verify;

  Plan plan;
  switch (mode) {
    case RoundMode::Policy:
      plan = decide(view, belief, spec_.policy, noise_, cfg.c_ver, streams_, event.round, &hindsight);
      break;
    case RoundMode::ForceNoVerify:
      plan = no_verify_plan(view, belief, spec_.policy, &hindsight);
      break;
    case RoundMode::ForceVerify:
      plan = no_verify_plan(view, belief, spec_.policy, &hindsight);
      plan.verify = true;
      plan.action_kind = ActionKind::VerifyThenPrice;
      break;
  }

  // Frozen pre-round state for the no-verification counterfactual.
  std::optional<RunState> frozen;
  if (mode == RoundMode::Policy && plan.verify && spec_.counterfactuals) frozen = st;

  CostBelief next_belief = belief;
  std::optional<double> refined;
  Decision decision;
  if (plan.verify) {
    refined = st.env.refined_signal(event);
    next_belief = absorb_refined(belief, *refined, noise_);
    decision = price_after_verification(view, next_belief);
  } else {
    decision = to_decision(plan);
  }

  const StepOutcome out = st.env.step(decision, event);

  RoundRecord rec;
  rec.round_index = event.round;
  rec.observation = obs;
  rec.decision = decision;
  rec.purchased = out.purchased;
  rec.true_cost = out.true_cost;
  rec.refined_signal = refined;
  rec.reward = out.reward;
  rec.belief_mu = belief.mu;
  rec.belief_sigma = belief.sigma;
  rec.value_direct = plan.values.v_direct;
  rec.value_risk = plan.values.v_risk;
  rec.value_verify = plan.values.v_verify;
  if (mode == RoundMode::Policy && spec_.info_values) {
    rec.info_value = info_value(st.model, obs.context, obs.asset, cfg.grid, belief.mu, out.true_cost);
  }
  if (frozen) {
    const RoundRecord without = play(*frozen, event, RoundMode::ForceNoVerify);
    rec.counterfactual_price = without.decision.price;
    rec.verification_roi = round_roi(rec, without, cfg.c_ver);
  }

  st.model.update(featurize(obs.context, obs.asset, decision.price, decision.pricing_cost_proxy, cfg.n_task_kinds),
                  out.purchased);
  if (!plan.verify) next_belief = update_sigma(update_mean(belief, obs.coarse_cost, noise_), false, noise_);
  st.beliefs.put(obs.asset.asset_id, next_belief);
  return rec;
}

Trajectory Runner::run(const std::vector<char>* schedule) const {
  Trajectory traj;
  traj.setting_id = spec_.env->setting_id;
  traj.method_id = spec_.method_id;
  traj.seed = seed_;
  traj.c_ver = spec_.env->c_ver;
  traj.horizon = spec_.env->horizon;
  RunState st = initial_state();
  const auto& events = st.env.events();
  traj.records.reserve(events.size());
  for (const RoundEvent& event : events) {
    std::optional<bool> scheduled;
    if (schedule) scheduled = (*schedule).at(static_cast<std::size_t>(event.round)) != 0;
    try {
      traj.records.push_back(play(st, event, RoundMode::Policy, scheduled));
    } catch (const InvariantViolation& e) {
      throw InvariantViolation("setting=" + traj.setting_id + " method=" + traj.method_id +
                               " seed=" + std::to_string(seed_) + " round=" + std::to_string(event.round) + ": " +
                               e.what());
    }
  }
  return traj;
}

Trajectory run_trajectory(const RunSpec& spec, std::int64_t seed) {
  switch (spec.policy.kind) {
    case PolicyKind::OraclePositiveROI:
    case PolicyKind::OraclePriceChangePositive:
      return oracle_replay(spec, seed);
    default:
      return Runner(spec, seed).run();
  }
}

}  // namespace nhcrop
