#include "nhcrop/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nhcrop/csv.hpp"
#include "nhcrop/demand_model.hpp"
#include "nhcrop/errors.hpp"

namespace nhcrop {

std::string_view to_string(EnvMode mode) {
  switch (mode) {
    case EnvMode::Synthetic:
      return "synthetic";
    case EnvMode::RealProxy:
      return "real_proxy";
    case EnvMode::UtilityGrounded:
      return "utility_grounded";
  }
  return "synthetic";
}

bool AssetTable::has_utilities() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [&](const AssetRow& r) {
    return r.utilities.size() == static_cast<std::size_t>(n_task_kinds);
  });
}

void AssetTable::validate() const {
  if (n_task_kinds <= 0) throw DataError("asset table needs at least one task kind");
  if (rows.empty()) throw DataError("asset table is empty");
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (const auto& row : rows) {
    const std::string where = "asset " + std::to_string(row.asset.asset_id);
    try {
      nhcrop::validate(row.asset, n_task_kinds);
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!unit(row.true_cost) || !unit(row.coarse_base) || !unit(row.verify_base)) {
      throw DataError(where + ": cost columns outside [0,1]");
    }
    if (!row.utilities.empty() && row.utilities.size() != static_cast<std::size_t>(n_task_kinds)) {
      throw DataError(where + ": utility row length differs from task kinds");
    }
    for (double u : row.utilities) {
      if (!std::isfinite(u)) throw DataError(where + ": non-finite utility");
    }
  }
}

void write_asset_table_csv(std::ostream& out, const AssetTable& table) {
  const int t = table.n_task_kinds;
  const bool utils = table.has_utilities();
  csv::Row header;
  header.add("asset_id").add("source_kind").add("quality").add("size_norm").add("rarity");
  for (int k = 0; k < t; ++k) header.add("rel_" + std::to_string(k));
  header.add("true_cost").add("coarse_base").add("verify_base");
  if (utils) {
    for (int k = 0; k < t; ++k) header.add("util_" + std::to_string(k));
  }
  out << header.str() << '\n';
  for (const auto& row : table.rows) {
    csv::Row r;
    r.add(static_cast<long long>(row.asset.asset_id))
        .add(static_cast<long long>(row.asset.source_kind))
        .add(row.asset.quality, kTableDigits)
        .add(row.asset.size_norm, kTableDigits)
        .add(row.asset.rarity, kTableDigits);
    for (double rel : row.asset.relevance_profile) r.add(rel, kTableDigits);
    r.add(row.true_cost, kTableDigits).add(row.coarse_base, kTableDigits).add(row.verify_base, kTableDigits);
    if (utils) {
      for (double u : row.utilities) r.add(u, kTableDigits);
    }
    out << r.str() << '\n';
  }
}

AssetTable read_asset_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("asset table CSV is empty");
  const auto header = csv::split(line);
  int n_rel = 0;
  int n_util = 0;
  for (const auto& h : header) {
    if (h.rfind("rel_", 0) == 0) ++n_rel;
    if (h.rfind("util_", 0) == 0) ++n_util;
  }
  if (n_rel == 0) throw DataError("asset table has no rel_ columns");
  if (n_util != 0 && n_util != n_rel) throw DataError("asset table util_ and rel_ column counts differ");
  const std::size_t expected = 5 + static_cast<std::size_t>(n_rel) + 3 + static_cast<std::size_t>(n_util);
  if (header.size() != expected || header[0] != "asset_id") throw DataError("unexpected asset table header");

  AssetTable table;
  table.n_task_kinds = n_rel;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split(line);
    if (f.size() != expected) throw DataError("asset table row has wrong field count");
    AssetRow row;
    std::size_t i = 0;
    row.asset.asset_id = csv::parse_int(f[i++]);
    row.asset.source_kind = static_cast<int>(csv::parse_int(f[i++]));
    row.asset.quality = csv::parse_real(f[i++]);
    row.asset.size_norm = csv::parse_real(f[i++]);
    row.asset.rarity = csv::parse_real(f[i++]);
    for (int k = 0; k < n_rel; ++k) row.asset.relevance_profile.push_back(csv::parse_real(f[i++]));
    row.true_cost = csv::parse_real(f[i++]);
    row.coarse_base = csv::parse_real(f[i++]);
    row.verify_base = csv::parse_real(f[i++]);
    for (int k = 0; k < n_util; ++k) row.utilities.push_back(csv::parse_real(f[i++]));
    table.rows.push_back(std::move(row));
  }
  table.validate();
  return table;
}

AssetTable load_asset_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open asset table " + path);
  try {
    return read_asset_table_csv(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void EnvironmentConfig::validate() const {
  if (setting_id.empty()) throw ConfigError("setting_id is empty");
  if (horizon <= 0) throw ConfigError(setting_id + ": horizon must be positive");
  if (n_task_kinds <= 0) throw ConfigError(setting_id + ": n_task_kinds must be positive");
  if (!(sigma_coarse >= 0.0 && sigma_refined >= 0.0 && sigma_drift >= 0.0 && sigma_demand >= 0.0)) {
    throw ConfigError(setting_id + ": noise std must be >= 0");
  }
  if (!(c_ver >= 0.0)) throw ConfigError(setting_id + ": c_ver must be >= 0");
  if (mode == EnvMode::Synthetic) {
    if (n_assets <= 0) throw ConfigError(setting_id + ": n_assets must be positive");
    if (!(cost_low >= 0.0 && cost_low <= cost_high && cost_high <= 1.0)) {
      throw ConfigError(setting_id + ": latent cost range must lie in [0,1]");
    }
  } else {
    if (!table) throw ConfigError(setting_id + ": table mode requires an asset table");
    if (table->n_task_kinds != n_task_kinds) throw ConfigError(setting_id + ": asset table task kinds differ");
    if (mode == EnvMode::UtilityGrounded && !table->has_utilities()) {
      throw DataError(setting_id + ": utility matrix incomplete");
    }
  }
}

AssetTable gen_synthetic_market(const EnvironmentConfig& cfg, std::int64_t seed) {
  const CounterRng rng = CounterRng::for_run(cfg.setting_id, static_cast<std::uint64_t>(seed)).derive("assets");
  AssetTable table;
  table.n_task_kinds = cfg.n_task_kinds;
  for (int a = 0; a < cfg.n_assets; ++a) {
    const auto r = static_cast<std::uint64_t>(a);
    AssetRow row;
    row.asset.asset_id = a;
    row.asset.source_kind = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_task_kinds), r, 0));
    row.asset.quality = rng.uniform(r, 1);
    row.asset.size_norm = rng.uniform(r, 2);
    row.asset.rarity = rng.uniform(r, 3);
    for (int k = 0; k < cfg.n_task_kinds; ++k) {
      const double u = rng.uniform(r, 4, static_cast<std::uint64_t>(k));
      row.asset.relevance_profile.push_back(k == row.asset.source_kind ? 0.6 + 0.4 * u : 0.4 * u);
    }
    row.true_cost = cfg.cost_low + (cfg.cost_high - cfg.cost_low) * rng.uniform(r, 5);
    row.coarse_base = row.true_cost;
    row.verify_base = row.true_cost;
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<RoundEvent> gen_event_stream(const EnvironmentConfig& cfg, std::int64_t seed) {
  if (seed < 0) throw ConfigError("seed must be >= 0");
  const CounterRng rng = CounterRng::for_run(cfg.setting_id, static_cast<std::uint64_t>(seed)).derive("events");
  const std::size_t n_assets =
      cfg.mode == EnvMode::Synthetic ? static_cast<std::size_t>(cfg.n_assets) : cfg.table->rows.size();
  std::vector<RoundEvent> events;
  events.reserve(static_cast<std::size_t>(cfg.horizon));
  for (int t = 0; t < cfg.horizon; ++t) {
    const auto r = static_cast<std::uint64_t>(t);
    RoundEvent e;
    e.round = t;
    e.context.context_id = t;
    e.context.task_kind = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_task_kinds), r, kChanTask));
    e.context.budget_level = rng.uniform(r, kChanBudget);
    e.context.privacy_sensitivity = rng.uniform(r, kChanPrivacy);
    e.asset_index = static_cast<std::size_t>(rng.below(n_assets, r, kChanAsset));
    e.coarse_noise = cfg.sigma_coarse * rng.normal(r, kChanCoarse);
    e.refined_noise = cfg.sigma_refined * rng.normal(r, kChanRefined);
    e.drift = cfg.sigma_drift * rng.normal(r, kChanDrift);
    e.purchase_u = rng.uniform(r, kChanPurchase);
    e.demand_noise = cfg.sigma_demand * rng.normal(r, kChanDemand);
    events.push_back(e);
  }
  return events;
}

double synthetic_purchase_prob(const EnvironmentConfig& cfg, const TaskContext& ctx, const Asset& asset, double price,
                               double cost_proxy_platform) {
  const double logit = cfg.beta_0 + cfg.beta_rel * asset.relevance(ctx.task_kind) + cfg.beta_q * asset.quality -
                       cfg.beta_p * cfg.rho_map(ctx.budget_level) * price -
                       cfg.beta_c * cfg.kappa_map(ctx.privacy_sensitivity) * cost_proxy_platform;
  return logistic(logit);
}

double utility_purchase_prob(const EnvironmentConfig& cfg, const TaskContext& ctx, const AssetRow& row, double price,
                             double cost_proxy_platform, double demand_noise) {
  if (ctx.task_kind < 0 || static_cast<std::size_t>(ctx.task_kind) >= row.utilities.size()) {
    throw DataError("utility matrix incomplete");
  }
  const double logit = cfg.beta_0 + cfg.beta_u * row.utilities[static_cast<std::size_t>(ctx.task_kind)] -
                       cfg.beta_p * cfg.rho_map(ctx.budget_level) * price -
                       cfg.beta_c * cfg.kappa_map(ctx.privacy_sensitivity) * cost_proxy_platform + demand_noise;
  return logistic(logit);
}

Environment::Environment(std::shared_ptr<const EnvironmentConfig> cfg, std::int64_t seed)
    : cfg_(std::move(cfg)), seed_(seed) {
  cfg_->validate();
  if (cfg_->mode == EnvMode::Synthetic) {
    assets_ = std::make_shared<const AssetTable>(gen_synthetic_market(*cfg_, seed_));
  } else {
    assets_ = cfg_->table;
  }
  events_ = std::make_shared<const std::vector<RoundEvent>>(gen_event_stream(*cfg_, seed_));
  costs_.reserve(assets_->rows.size());
  for (const auto& row : assets_->rows) costs_.push_back(row.true_cost);
}

Observation Environment::observe(const RoundEvent& event) {
  pricing_ = true;
  return {event.context, assets_->rows[event.asset_index].asset, coarse_estimate(event)};
}

double Environment::coarse_estimate(const RoundEvent& event) const {
  const double base =
      cfg_->mode == EnvMode::Synthetic ? costs_[event.asset_index] : assets_->rows[event.asset_index].coarse_base;
  return std::clamp(base + event.coarse_noise, 0.0, 1.0);
}

double Environment::refined_signal(const RoundEvent& event) const {
  const double base =
      cfg_->mode == EnvMode::Synthetic ? costs_[event.asset_index] : assets_->rows[event.asset_index].verify_base;
  return std::clamp(base + event.refined_noise, 0.0, 1.0);
}

double Environment::purchase_probability(const RoundEvent& event, double price, double cost_proxy_platform) const {
  const AssetRow& row = assets_->rows[event.asset_index];
  if (cfg_->mode == EnvMode::UtilityGrounded) {
    return utility_purchase_prob(*cfg_, event.context, row, price, cost_proxy_platform, event.demand_noise);
  }
  return synthetic_purchase_prob(*cfg_, event.context, row.asset, price, cost_proxy_platform);
}

StepOutcome Environment::step(const Decision& decision, const RoundEvent& event) {
  if (!cfg_->grid.contains(decision.price)) {
    throw InvariantViolation("posted price " + format_real(decision.price) + " is not on the grid");
  }
  pricing_ = false;
  StepOutcome out;
  const double prob = purchase_probability(event, decision.price, decision.pricing_cost_proxy);
  out.purchased = event.purchase_u < prob;
  out.true_cost = costs_[event.asset_index];
  if (decision.verify) out.refined_signal = refined_signal(event);
  out.reward = safe_net_reward(out.purchased, decision.price, out.true_cost, decision.verify, cfg_->c_ver);
  if (cfg_->mode == EnvMode::Synthetic) {
    costs_[event.asset_index] = std::clamp(out.true_cost + event.drift, 0.0, 1.0);
  }
  return out;
}

double Environment::true_cost(const RoundEvent& event) const {
  if (pricing_ && tripwire_armed_) {
    throw InvariantViolation("true cost read during pricing of round " + std::to_string(event.round));
  }
  return costs_[event.asset_index];
}

double Environment::oracle_true_cost(const RoundEvent& event) const { return costs_[event.asset_index]; }

}  // namespace nhcrop
