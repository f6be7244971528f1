#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nhcrop/core_types.hpp"
#include "nhcrop/counter_rng.hpp"

namespace nhcrop {

enum class EnvMode { Synthetic, RealProxy, UtilityGrounded };

std::string_view to_string(EnvMode mode);

struct AffineMap {
  double intercept = 0.0;
  double slope = 0.0;
  double operator()(double x) const { return intercept + slope * x; }
};

struct AssetRow {
  Asset asset;
  double true_cost = 0.0;
  double coarse_base = 0.0;
  double verify_base = 0.0;
  std::vector<double> utilities;  // per task kind; empty when absent
};

struct AssetTable {
  int n_task_kinds = 0;
  std::vector<AssetRow> rows;

  bool has_utilities() const;
  // Range and shape invariants; throws DataError describing the first violation.
  void validate() const;
};

// asset_id,source_kind,quality,size_norm,rarity,rel_0..rel_{T-1},true_cost,coarse_base,verify_base[,util_0..util_{T-1}]
void write_asset_table_csv(std::ostream& out, const AssetTable& table);
AssetTable read_asset_table_csv(std::istream& in);
AssetTable load_asset_table(const std::string& path);

// Environment parameters of one benchmark setting. The synthetic market uses
// the relevance/quality demand logit and drifting latent costs; table modes
// read assets from an AssetTable and keep costs static.
struct EnvironmentConfig {
  std::string setting_id;
  EnvMode mode = EnvMode::Synthetic;
  int horizon = 420;
  int n_task_kinds = 3;
  int n_assets = 60;  // synthetic market size

  double sigma_coarse = 0.3;   // coarse-estimate noise
  double sigma_refined = 0.03; // refined-signal noise
  double sigma_drift = 0.0;    // latent-cost drift (synthetic only)
  double sigma_demand = 0.0;   // logit noise (utility-grounded only)

  double beta_0 = 0.0;
  double beta_rel = 0.0;
  double beta_q = 0.0;
  double beta_u = 0.0;
  double beta_p = 0.0;
  double beta_c = 0.0;
  AffineMap rho_map{1.0, 0.0};    // price sensitivity from budget_level
  AffineMap kappa_map{1.0, 0.0};  // cost sensitivity from privacy_sensitivity

  double cost_low = 0.05;  // initial latent costs of the synthetic market
  double cost_high = 0.7;

  double c_ver = 0.02;
  PriceGrid grid = PriceGrid::decile();

  std::shared_ptr<const AssetTable> table;  // required by table modes

  // Throws ConfigError on invalid parameters.
  void validate() const;
};

struct RoundEvent {
  int round = 0;
  TaskContext context;
  std::size_t asset_index = 0;
  double coarse_noise = 0.0;   // epsilon
  double refined_noise = 0.0;  // eta
  double drift = 0.0;          // xi
  double purchase_u = 0.0;     // in [0,1)
  double demand_noise = 0.0;   // logit noise
};

// Channels of the per-run keyed generator.
enum EventChannel : std::uint64_t {
  kChanTask = 1,
  kChanBudget,
  kChanPrivacy,
  kChanAsset,
  kChanCoarse,
  kChanRefined,
  kChanDrift,
  kChanPurchase,
  kChanDemand,
};

// Deterministic action-independent stream of length horizon, keyed on
// (setting_id, seed, round, channel).
std::vector<RoundEvent> gen_event_stream(const EnvironmentConfig& cfg, std::int64_t seed);

// The synthetic market's assets and initial latent costs for one seed.
AssetTable gen_synthetic_market(const EnvironmentConfig& cfg, std::int64_t seed);

double synthetic_purchase_prob(const EnvironmentConfig& cfg, const TaskContext& ctx, const Asset& asset, double price,
                               double cost_proxy_platform);

// Throws DataError("utility matrix incomplete") when the asset lacks a utility
// for the context's task kind.
double utility_purchase_prob(const EnvironmentConfig& cfg, const TaskContext& ctx, const AssetRow& row, double price,
                             double cost_proxy_platform, double demand_noise);

struct StepOutcome {
  bool purchased = false;
  double reward = 0.0;
  double true_cost = 0.0;
  std::optional<double> refined_signal;
};

// One run's world: the asset table (generated per seed for the synthetic
// market), the event stream, and the drifting latent costs.
class Environment {
 public:
  Environment(std::shared_ptr<const EnvironmentConfig> cfg, std::int64_t seed);

  const EnvironmentConfig& config() const { return *cfg_; }
  std::int64_t seed() const { return seed_; }
  const std::vector<RoundEvent>& events() const { return *events_; }
  const AssetTable& assets() const { return *assets_; }

  // Enters the pricing phase of the event's round and returns what the
  // platform sees before pricing.
  Observation observe(const RoundEvent& event);
  double coarse_estimate(const RoundEvent& event) const;
  // Refined signal of the event's asset: clip(c* + eta) in the synthetic
  // market, clip(h_verify + eta) for tables.
  double refined_signal(const RoundEvent& event) const;
  double purchase_probability(const RoundEvent& event, double price, double cost_proxy_platform) const;

  // Resolves the round: draws the purchase from the event's uniform, books the
  // safe net reward, then applies drift. Throws on off-grid prices.
  StepOutcome step(const Decision& decision, const RoundEvent& event);

  // Latent cost of the asset in the event. Reading it while a round is being
  // priced trips an InvariantViolation when the tripwire is armed.
  double true_cost(const RoundEvent& event) const;
  // Hindsight channel used only by oracle policies.
  double oracle_true_cost(const RoundEvent& event) const;

  void arm_tripwire(bool armed) { tripwire_armed_ = armed; }
  bool in_pricing_phase() const { return pricing_; }

 private:
  std::shared_ptr<const EnvironmentConfig> cfg_;
  std::int64_t seed_;
  std::shared_ptr<const AssetTable> assets_;
  std::shared_ptr<const std::vector<RoundEvent>> events_;
  std::vector<double> costs_;
  bool pricing_ = false;
  bool tripwire_armed_ = true;
};

}  // namespace nhcrop
