#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nhcrop/core_types.hpp"
#include "nhcrop/demand_model.hpp"

namespace nhcrop {

struct RunSpec;

// max_p R(p, c*) - max_p R(p, mu) under the decision-time model. Can be negative.
double info_value(const DemandModel& model, const TaskContext& ctx, const Asset& asset, const PriceGrid& grid, double mu,
                  double true_cost);

// r_with - r_without of one round replayed from identical state, evaluated as
// the revenue difference minus the fee so that identical outcomes give
// exactly -c_ver.
double round_roi(const RoundRecord& with, const RoundRecord& without, double c_ver);

// ---------------------------------------------------------------------------
// Decision-relevance stratification

enum class Bucket { Low, Medium, High };
std::string_view to_string(Bucket bucket);

// Pooled tertile assignment of every (seed, round) of a setting, computed once
// from the price-only runs and shared by every method.
class RelevanceBuckets {
 public:
  RelevanceBuckets() = default;
  RelevanceBuckets(std::map<std::int64_t, std::vector<Bucket>> assignment, double low_cut, double high_cut)
      : assignment_(std::move(assignment)), low_cut_(low_cut), high_cut_(high_cut) {}

  // Throws std::out_of_range for unknown (seed, round).
  Bucket at(std::int64_t seed, int round) const;
  const std::map<std::int64_t, std::vector<Bucket>>& assignment() const { return assignment_; }
  double low_cut() const { return low_cut_; }
  double high_cut() const { return high_cut_; }

 private:
  std::map<std::int64_t, std::vector<Bucket>> assignment_;
  double low_cut_ = 0.0;
  double high_cut_ = 0.0;
};

// Assigns scores by rank thresholds at the given quantiles; a score equal to a
// threshold goes to the lower bucket.
RelevanceBuckets assign_buckets(const std::map<std::int64_t, std::vector<double>>& scores_by_seed, double q_low = 1.0 / 3,
                                double q_high = 2.0 / 3);

// |info_value| of the price-only trajectories of every required seed.
// Throws std::invalid_argument("missing seed ...") when one is absent.
RelevanceBuckets relevance_buckets(const std::vector<Trajectory>& price_only, const std::vector<std::int64_t>& seeds,
                                   double q_low = 1.0 / 3, double q_high = 2.0 / 3);

struct BucketReport {
  std::string setting_id;
  Bucket bucket = Bucket::Low;
  std::string method_id;
  double mean_reward_in_bucket = 0.0;
  long n_rounds_in_bucket = 0;
};

// One row per bucket for one method's trajectories of a setting.
std::vector<BucketReport> bucket_report(const RelevanceBuckets& buckets, const std::vector<Trajectory>& trajectories);
// Same from per-round rewards keyed by seed.
std::vector<BucketReport> bucket_report(const RelevanceBuckets& buckets, const std::string& setting_id,
                                        const std::string& method_id,
                                        const std::map<std::int64_t, std::vector<double>>& rewards_by_seed);

// ---------------------------------------------------------------------------
// Paired seed-level test

struct PairedTestResult {
  double mean_gap = 0.0;
  double p_value = 1.0;
  double win_rate = 0.0;
};

// One-sided paired t-test of mean(a - b) > 0. With all differences equal the
// p-value is 1 for a zero gap, 0 for a positive gap and 1 for a negative gap.
PairedTestResult paired_directional_test(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Verification audit

struct VerificationEvent {
  std::string setting_id;
  std::string method_id;
  std::int64_t seed = 0;
  int round = 0;
  double price = 0.0;
  double true_cost = 0.0;
  double cost_estimate = 0.0;     // belief mean before verifying
  std::optional<double> est_voi;  // v_ver - best no-verification value
  double roi = 0.0;
  bool changed_price = false;
};

struct VerificationAudit {
  std::vector<VerificationEvent> events;
  std::optional<double> changed_price_frac;
  std::optional<double> positive_roi_frac;
  std::optional<double> mean_roi;
};

// Events of the verified rounds that carry a one-round counterfactual.
VerificationAudit audit_verifications(const Trajectory& traj);
// Runs the cell with counterfactual replay enabled and audits it.
VerificationAudit verification_roi_audit(const RunSpec& spec, std::int64_t seed);

// Verified events with roi > 0, highest roi first, at most top_k.
std::vector<VerificationEvent> representative_events(const std::vector<VerificationEvent>& events, std::size_t top_k);

// Two-pass hindsight oracle: the first pass follows the no-verification branch
// recording one-round ROI of verifying, the second verifies exactly on the
// rounds meeting the oracle criterion. The free oracle is single-pass.
Trajectory oracle_replay(const RunSpec& spec, std::int64_t seed);

// ---------------------------------------------------------------------------
// Clip selection and summaries

// Argmax of validation reward; ties go to the smaller q_max. Throws on empty input.
double select_clip(const std::map<double, double>& validation_results);

struct RunSummary {
  std::string setting_id;
  std::string method_id;
  std::int64_t seed = 0;
  double cumulative_reward = 0.0;
  double mean_reward = 0.0;
  double verify_freq = 0.0;
  int n_rounds = 0;
  std::optional<double> mean_ver_roi;
  std::optional<double> positive_roi_frac;
  std::optional<double> price_change_frac;
};

struct AggregateRow {
  std::string setting_id;
  std::string method_id;
  int seeds = 0;
  int rounds = 0;
  double cum_reward_mean = 0.0;
  double cum_reward_std = 0.0;  // sample std across seeds (0 for one seed)
  double mean_reward = 0.0;
  double verify_freq = 0.0;
  std::optional<double> p_vs_price_only;
};

struct SummaryTable {
  std::vector<RunSummary> seed_rows;
  std::vector<AggregateRow> aggregates;
};

RunSummary summarize_run(const Trajectory& traj);
// Rows ordered by (setting, method, seed); the p-value compares against the
// setting's price_only runs paired on common seeds.
SummaryTable summarize(const std::vector<Trajectory>& trajectories);
// Sorts seed rows and computes the aggregates.
SummaryTable aggregate_summaries(std::vector<RunSummary> seed_rows);

// ---------------------------------------------------------------------------
// CSV emission (fixed schemas, 12 significant digits)

void write_summary_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
void write_seed_level_csv(std::ostream& out, const std::vector<RunSummary>& rows);
void write_round_level_header(std::ostream& out);
void write_round_level_rows(std::ostream& out, const Trajectory& traj);
void write_bucket_csv(std::ostream& out, const std::vector<BucketReport>& rows);
// Wide layout: setting,method,low,medium,high,n_low,n_medium,n_high
void write_stratified_csv(std::ostream& out, const std::vector<BucketReport>& rows);
void write_clip_tuning_csv(std::ostream& out, const std::map<double, double>& validation_results, double selected);
void write_verification_events_csv(std::ostream& out, const std::vector<VerificationEvent>& events);
// Per (setting, method): event count, mean roi, positive-roi and price-change shares.
void write_roi_summary_csv(std::ostream& out, const std::vector<VerificationEvent>& events);

}  // namespace nhcrop
