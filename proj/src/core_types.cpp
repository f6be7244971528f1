#include "nhcrop/core_types.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "nhcrop/csv.hpp"
#include "nhcrop/errors.hpp"

namespace nhcrop {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

void require_unit(double v, const char* name) {
  if (!in_unit(v)) throw std::invalid_argument(std::string(name) + " outside [0,1]");
}

}  // namespace

void validate(const TaskContext& ctx, int n_task_kinds) {
  if (ctx.task_kind < 0 || ctx.task_kind >= n_task_kinds) throw std::invalid_argument("task_kind out of range");
  require_unit(ctx.budget_level, "budget_level");
  require_unit(ctx.privacy_sensitivity, "privacy_sensitivity");
}

void validate(const Asset& asset, int n_task_kinds) {
  require_unit(asset.quality, "quality");
  require_unit(asset.size_norm, "size_norm");
  require_unit(asset.rarity, "rarity");
  if (asset.relevance_profile.size() != static_cast<std::size_t>(n_task_kinds)) {
    throw std::invalid_argument("relevance_profile length differs from number of task kinds");
  }
  for (double r : asset.relevance_profile) require_unit(r, "relevance");
}

PriceGrid::PriceGrid(std::vector<double> prices) : prices_(std::move(prices)) {
  if (prices_.empty()) throw std::invalid_argument("price grid is empty");
  for (std::size_t i = 0; i < prices_.size(); ++i) {
    if (!(prices_[i] > 0.0 && prices_[i] <= 1.0)) throw std::invalid_argument("price outside (0,1]");
    if (i > 0 && !(prices_[i] > prices_[i - 1])) throw std::invalid_argument("price grid not strictly increasing");
  }
}

PriceGrid PriceGrid::decile() {
  std::vector<double> prices;
  for (int k = 1; k <= 10; ++k) prices.push_back(k / 10.0);
  return PriceGrid(std::move(prices));
}

bool PriceGrid::contains(double price) const {
  for (double p : prices_) {
    if (p == price) return true;
  }
  return false;
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Direct:
      return "direct";
    case ActionKind::Risk:
      return "risk";
    case ActionKind::VerifyThenPrice:
      return "verify";
  }
  return "direct";
}

ActionKind action_kind_from_string(std::string_view text) {
  if (text == "direct") return ActionKind::Direct;
  if (text == "risk") return ActionKind::Risk;
  if (text == "verify") return ActionKind::VerifyThenPrice;
  throw DataError("unknown action kind '" + std::string(text) + "'");
}

double safe_net_reward(bool purchased, double price, double true_cost, bool verified, double c_ver) {
  return (purchased ? 1.0 : 0.0) * (price - true_cost) - c_ver * (verified ? 1.0 : 0.0);
}

double cumulative_reward(const Trajectory& traj) {
  double total = 0.0;
  for (const auto& rec : traj.records) total += rec.reward;
  return total;
}

double verification_frequency(const Trajectory& traj) {
  if (traj.horizon <= 0) throw std::invalid_argument("empty trajectory");
  std::size_t verified = 0;
  for (const auto& rec : traj.records) verified += rec.decision.verify ? 1 : 0;
  return static_cast<double>(verified) / traj.horizon;
}

bool reward_identity_holds(const RoundRecord& rec, double c_ver) {
  return rec.reward ==
         safe_net_reward(rec.purchased, rec.decision.price, rec.true_cost, rec.decision.verify, c_ver);
}

namespace {

bool same_bits(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same_bits(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_bits(*a, *b);
}

}  // namespace

bool same_decisions_and_outcomes(const Trajectory& a, const Trajectory& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    const bool same = x.round_index == y.round_index && x.decision.verify == y.decision.verify &&
                      x.decision.action_kind == y.decision.action_kind && same_bits(x.decision.price, y.decision.price) &&
                      same_bits(x.decision.pricing_cost_proxy, y.decision.pricing_cost_proxy) &&
                      x.purchased == y.purchased && same_bits(x.true_cost, y.true_cost) &&
                      same_bits(x.observation.coarse_cost, y.observation.coarse_cost) &&
                      same_bits(x.refined_signal, y.refined_signal) && same_bits(x.reward, y.reward) &&
                      same_bits(x.belief_mu, y.belief_mu) && same_bits(x.belief_sigma, y.belief_sigma) &&
                      same_bits(x.value_direct, y.value_direct) && same_bits(x.value_risk, y.value_risk) &&
                      same_bits(x.info_value, y.info_value) && same_bits(x.counterfactual_price, y.counterfactual_price) &&
                      same_bits(x.verification_roi, y.verification_roi);
    if (!same) return false;
  }
  return true;
}

std::string format_real(double value, int digits) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";  // folds -0 so emitted bytes do not depend on sign of zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

std::string trajectory_row(const RoundRecord& rec, int digits) {
  csv::Row row;
  row.add(static_cast<long long>(rec.round_index))
      .add(static_cast<long long>(rec.decision.verify ? 1 : 0))
      .add(to_string(rec.decision.action_kind))
      .add(rec.decision.price, digits)
      .add(static_cast<long long>(rec.purchased ? 1 : 0))
      .add(rec.true_cost, digits)
      .add(rec.observation.coarse_cost, digits)
      .add(rec.refined_signal, digits)
      .add(rec.reward, digits)
      .add(rec.belief_mu, digits)
      .add(rec.belief_sigma, digits)
      .add(rec.value_direct, digits)
      .add(rec.value_risk, digits)
      .add(rec.value_verify, digits)
      .add(rec.info_value, digits)
      .add(rec.counterfactual_price, digits)
      .add(rec.verification_roi, digits);
  return row.str();
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int digits) {
  out << kTrajectoryCsvHeader << '\n';
  for (const auto& rec : traj.records) out << trajectory_row(rec, digits) << '\n';
}

Trajectory read_trajectory_csv(std::istream& in, std::string setting_id, std::string method_id, std::int64_t seed,
                               double c_ver) {
  Trajectory traj;
  traj.setting_id = std::move(setting_id);
  traj.method_id = std::move(method_id);
  traj.seed = seed;
  traj.c_ver = c_ver;
  std::string line;
  if (!std::getline(in, line)) throw DataError("trajectory CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryCsvHeader) throw DataError("unexpected trajectory CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 17) throw DataError("trajectory row has " + std::to_string(f.size()) + " fields, expected 17");
    RoundRecord rec;
    rec.round_index = static_cast<int>(csv::parse_int(f[0]));
    rec.decision.verify = csv::parse_int(f[1]) != 0;
    rec.decision.action_kind = action_kind_from_string(f[2]);
    rec.decision.price = csv::parse_real(f[3]);
    rec.purchased = csv::parse_int(f[4]) != 0;
    rec.true_cost = csv::parse_real(f[5]);
    rec.observation.coarse_cost = csv::parse_real(f[6]);
    rec.refined_signal = csv::parse_optional_real(f[7]);
    rec.reward = csv::parse_real(f[8]);
    rec.belief_mu = csv::parse_real(f[9]);
    rec.belief_sigma = csv::parse_real(f[10]);
    rec.value_direct = csv::parse_real(f[11]);
    rec.value_risk = csv::parse_real(f[12]);
    rec.value_verify = csv::parse_optional_real(f[13]);
    rec.info_value = csv::parse_optional_real(f[14]);
    rec.counterfactual_price = csv::parse_optional_real(f[15]);
    rec.verification_roi = csv::parse_optional_real(f[16]);
    traj.records.push_back(std::move(rec));
  }
  traj.horizon = static_cast<int>(traj.records.size());
  return traj;
}

}  // namespace nhcrop
