#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nhcrop {

struct TaskContext {
  std::int64_t context_id = 0;
  int task_kind = 0;
  double budget_level = 0.0;
  double privacy_sensitivity = 0.0;
};

struct Asset {
  std::int64_t asset_id = 0;
  int source_kind = 0;
  double quality = 0.0;
  double size_norm = 0.0;
  double rarity = 0.0;
  std::vector<double> relevance_profile;  // one entry per task kind

  // Relevance of this asset to the given task kind.
  double relevance(int task_kind) const { return relevance_profile.at(static_cast<std::size_t>(task_kind)); }
};

// Throws std::invalid_argument when a field leaves [0,1] or the task kind is
// outside [0, n_task_kinds).
void validate(const TaskContext& ctx, int n_task_kinds);
void validate(const Asset& asset, int n_task_kinds);

// Strictly increasing candidate prices in (0,1].
class PriceGrid {
 public:
  explicit PriceGrid(std::vector<double> prices);

  // {0.1, 0.2, ..., 1.0}, each computed as k/10.
  static PriceGrid decile();

  const std::vector<double>& prices() const { return prices_; }
  std::size_t size() const { return prices_.size(); }
  double operator[](std::size_t i) const { return prices_[i]; }
  bool contains(double price) const;

 private:
  std::vector<double> prices_;
};

struct Observation {
  TaskContext context;
  Asset asset;
  double coarse_cost = 0.0;
};

enum class ActionKind { Direct, Risk, VerifyThenPrice };

std::string_view to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view text);

struct Decision {
  bool verify = false;
  ActionKind action_kind = ActionKind::Direct;
  double price = 0.0;
  double pricing_cost_proxy = 0.0;
};

// Safe net reward y(p - c*) - c_ver v. Every producer and checker of rewards
// goes through this one expression so recomputation is bit-exact.
double safe_net_reward(bool purchased, double price, double true_cost, bool verified, double c_ver);

struct RoundRecord {
  int round_index = 0;
  Observation observation;
  Decision decision;
  bool purchased = false;
  double true_cost = 0.0;
  std::optional<double> refined_signal;
  double reward = 0.0;
  double belief_mu = 0.0;
  double belief_sigma = 0.0;
  double value_direct = 0.0;
  double value_risk = 0.0;
  std::optional<double> value_verify;
  // Diagnostics filled by the evaluation layer, never read by policies.
  std::optional<double> info_value;
  std::optional<double> counterfactual_price;
  std::optional<double> verification_roi;
};

struct Trajectory {
  std::string setting_id;
  std::string method_id;
  std::int64_t seed = 0;
  std::vector<RoundRecord> records;
  double c_ver = 0.0;
  int horizon = 0;
};

double cumulative_reward(const Trajectory& traj);

// Fraction of rounds that paid for verification. Throws on zero horizon.
double verification_frequency(const Trajectory& traj);

// True when the stored reward equals the recomputed safe net reward bit-exactly.
bool reward_identity_holds(const RoundRecord& rec, double c_ver);

// Compares everything a policy decided and the environment returned, i.e. all
// record fields except the verify-value diagnostic (computed only by policies
// that evaluate verification).
bool same_decisions_and_outcomes(const Trajectory& a, const Trajectory& b);

// Per-round CSV with the fixed column layout
// round,verify,action_kind,price,purchased,true_cost,coarse_cost,refined_signal,
// reward,mu,sigma,v_dir,v_risk,v_ver,info_value,cf_price,ver_roi
// Absent optionals are written as empty fields.
inline constexpr std::string_view kTrajectoryCsvHeader =
    "round,verify,action_kind,price,purchased,true_cost,coarse_cost,refined_signal,reward,mu,sigma,v_dir,v_risk,"
    "v_ver,info_value,cf_price,ver_roi";

// Significant digits used by every emitted table.
inline constexpr int kTableDigits = 12;
// Enough digits for a lossless double round trip.
inline constexpr int kLosslessDigits = 17;

std::string format_real(double value, int digits = kTableDigits);

// Writes the record fields (no header) of one round, comma-separated.
std::string trajectory_row(const RoundRecord& rec, int digits = kTableDigits);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int digits = kTableDigits);

// Reads the per-round columns back. Context and asset snapshots are not part
// of the file and come back default-constructed.
Trajectory read_trajectory_csv(std::istream& in, std::string setting_id, std::string method_id, std::int64_t seed,
                               double c_ver);

}  // namespace nhcrop
