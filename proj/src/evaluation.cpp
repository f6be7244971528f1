#include "nhcrop/evaluation.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>

#include "nhcrop/csv.hpp"
#include "nhcrop/runner.hpp"

namespace nhcrop {

double info_value(const DemandModel& model, const TaskContext& ctx, const Asset& asset, const PriceGrid& grid, double mu,
                  double true_cost) {
  return model.best_price(ctx, asset, grid, true_cost).score - model.best_price(ctx, asset, grid, mu).score;
}

double round_roi(const RoundRecord& with, const RoundRecord& without, double c_ver) {
  const double gross_with = safe_net_reward(with.purchased, with.decision.price, with.true_cost, false, c_ver);
  const double gross_without =
      safe_net_reward(without.purchased, without.decision.price, without.true_cost, false, c_ver);
  const double fee = with.decision.verify ? c_ver : 0.0;
  return (gross_with - gross_without) - fee;
}

std::string_view to_string(Bucket bucket) {
  switch (bucket) {
    case Bucket::Low:
      return "low";
    case Bucket::Medium:
      return "medium";
    case Bucket::High:
      return "high";
  }
  return "low";
}

Bucket RelevanceBuckets::at(std::int64_t seed, int round) const {
  return assignment_.at(seed).at(static_cast<std::size_t>(round));
}

RelevanceBuckets assign_buckets(const std::map<std::int64_t, std::vector<double>>& scores_by_seed, double q_low,
                                double q_high) {
  if (!(q_low >= 0.0 && q_low <= q_high && q_high <= 1.0)) throw std::invalid_argument("invalid bucket quantiles");
  std::vector<double> pooled;
  for (const auto& [seed, scores] : scores_by_seed) pooled.insert(pooled.end(), scores.begin(), scores.end());
  if (pooled.empty()) return {};
  std::sort(pooled.begin(), pooled.end());
  const auto n = static_cast<double>(pooled.size());
  auto cut = [&](double q) {
    // Rank threshold: the ceil(n q)-th smallest score. The epsilon absorbs
    // the rounding of q = k/3.
    const double rank = std::ceil(n * q - 1e-9);
    const auto idx = static_cast<std::size_t>(std::clamp(rank - 1.0, 0.0, n - 1.0));
    return pooled[idx];
  };
  const double low_cut = cut(q_low);
  const double high_cut = cut(q_high);
  std::map<std::int64_t, std::vector<Bucket>> assignment;
  for (const auto& [seed, scores] : scores_by_seed) {
    auto& out = assignment[seed];
    out.reserve(scores.size());
    for (double s : scores) out.push_back(s <= low_cut ? Bucket::Low : (s <= high_cut ? Bucket::Medium : Bucket::High));
  }
  return RelevanceBuckets(std::move(assignment), low_cut, high_cut);
}

RelevanceBuckets relevance_buckets(const std::vector<Trajectory>& price_only, const std::vector<std::int64_t>& seeds,
                                   double q_low, double q_high) {
  std::map<std::int64_t, std::vector<double>> scores;
  for (const auto& traj : price_only) {
    auto& s = scores[traj.seed];
    s.clear();
    for (const auto& rec : traj.records) {
      if (!rec.info_value) throw std::invalid_argument("price-only trajectory lacks decision-value diagnostics");
      s.push_back(std::fabs(*rec.info_value));
    }
  }
  for (std::int64_t seed : seeds) {
    if (scores.count(seed) == 0) throw std::invalid_argument("missing seed " + std::to_string(seed));
  }
  // Only the requested seeds enter the pool.
  std::map<std::int64_t, std::vector<double>> selected;
  for (std::int64_t seed : seeds) selected[seed] = scores[seed];
  return assign_buckets(selected, q_low, q_high);
}

std::vector<BucketReport> bucket_report(const RelevanceBuckets& buckets, const std::string& setting_id,
                                        const std::string& method_id,
                                        const std::map<std::int64_t, std::vector<double>>& rewards_by_seed) {
  double sums[3] = {0.0, 0.0, 0.0};
  long counts[3] = {0, 0, 0};
  for (const auto& [seed, rewards] : rewards_by_seed) {
    for (std::size_t t = 0; t < rewards.size(); ++t) {
      const auto b = static_cast<int>(buckets.at(seed, static_cast<int>(t)));
      sums[b] += rewards[t];
      ++counts[b];
    }
  }
  std::vector<BucketReport> out;
  for (int b = 0; b < 3; ++b) {
    out.push_back({setting_id, static_cast<Bucket>(b), method_id, counts[b] > 0 ? sums[b] / counts[b] : 0.0, counts[b]});
  }
  return out;
}

std::vector<BucketReport> bucket_report(const RelevanceBuckets& buckets, const std::vector<Trajectory>& trajectories) {
  std::map<std::int64_t, std::vector<double>> rewards;
  std::string setting;
  std::string method;
  for (const auto& traj : trajectories) {
    setting = traj.setting_id;
    method = traj.method_id;
    auto& r = rewards[traj.seed];
    r.assign(static_cast<std::size_t>(traj.horizon), 0.0);
    for (const auto& rec : traj.records) r.at(static_cast<std::size_t>(rec.round_index)) = rec.reward;
  }
  return bucket_report(buckets, setting, method, rewards);
}

PairedTestResult paired_directional_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired test inputs differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired test needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  std::vector<double> diff(a.size());
  double wins = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff[i] = a[i] - b[i];
    if (a[i] > b[i]) wins += 1.0;
  }
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  PairedTestResult result{mean, 1.0, wins / n};
  const bool constant = std::all_of(diff.begin(), diff.end(), [&](double d) { return d == diff.front(); });
  if (constant) {
    result.p_value = mean > 0.0 ? 0.0 : 1.0;
    return result;
  }
  const double t = mean / (sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1.0);
  result.p_value = boost::math::cdf(boost::math::complement(dist, t));
  return result;
}

VerificationAudit audit_verifications(const Trajectory& traj) {
  VerificationAudit audit;
  double changed = 0.0;
  double positive = 0.0;
  double roi_sum = 0.0;
  for (const auto& rec : traj.records) {
    if (!rec.decision.verify || !rec.verification_roi || !rec.counterfactual_price) continue;
    VerificationEvent e;
    e.setting_id = traj.setting_id;
    e.method_id = traj.method_id;
    e.seed = traj.seed;
    e.round = rec.round_index;
    e.price = rec.decision.price;
    e.true_cost = rec.true_cost;
    e.cost_estimate = rec.belief_mu;
    if (rec.value_verify) e.est_voi = *rec.value_verify - std::max(rec.value_direct, rec.value_risk);
    e.roi = *rec.verification_roi;
    e.changed_price = rec.decision.price != *rec.counterfactual_price;
    changed += e.changed_price ? 1.0 : 0.0;
    positive += e.roi > 0.0 ? 1.0 : 0.0;
    roi_sum += e.roi;
    audit.events.push_back(std::move(e));
  }
  if (!audit.events.empty()) {
    const auto n = static_cast<double>(audit.events.size());
    audit.changed_price_frac = changed / n;
    audit.positive_roi_frac = positive / n;
    audit.mean_roi = roi_sum / n;
  }
  return audit;
}

VerificationAudit verification_roi_audit(const RunSpec& spec, std::int64_t seed) {
  RunSpec with_cf = spec;
  with_cf.counterfactuals = true;
  return audit_verifications(run_trajectory(with_cf, seed));
}

std::vector<VerificationEvent> representative_events(const std::vector<VerificationEvent>& events, std::size_t top_k) {
  std::vector<VerificationEvent> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out), [](const auto& e) { return e.roi > 0.0; });
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.roi != y.roi) return x.roi > y.roi;
    if (x.setting_id != y.setting_id) return x.setting_id < y.setting_id;
    if (x.method_id != y.method_id) return x.method_id < y.method_id;
    if (x.seed != y.seed) return x.seed < y.seed;
    return x.round < y.round;
  });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

Trajectory oracle_replay(const RunSpec& spec, std::int64_t seed) {
  const Runner runner(spec, seed);
  const PolicyKind kind = spec.policy.kind;
  if (kind != PolicyKind::OraclePositiveROI && kind != PolicyKind::OraclePriceChangePositive) return runner.run();

  RunState state = runner.initial_state();
  const auto& events = state.env.events();
  std::vector<char> schedule(events.size(), 0);
  for (const RoundEvent& event : events) {
    RunState branch = state;
    const RoundRecord with = runner.play(branch, event, RoundMode::ForceVerify);
    const RoundRecord without = runner.play(state, event, RoundMode::ForceNoVerify);
    const double roi = round_roi(with, without, spec.env->c_ver);
    const bool changed = with.decision.price != without.decision.price;
    const bool fire = roi > 0.0 && (kind == PolicyKind::OraclePositiveROI || changed);
    schedule[static_cast<std::size_t>(event.round)] = fire ? 1 : 0;
  }
  return runner.run(&schedule);
}

double select_clip(const std::map<double, double>& validation_results) {
  if (validation_results.empty()) throw std::invalid_argument("no clip values to select from");
  auto best = validation_results.begin();
  for (auto it = validation_results.begin(); it != validation_results.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

RunSummary summarize_run(const Trajectory& traj) {
  RunSummary s;
  s.setting_id = traj.setting_id;
  s.method_id = traj.method_id;
  s.seed = traj.seed;
  s.n_rounds = traj.horizon;
  s.cumulative_reward = cumulative_reward(traj);
  s.mean_reward = traj.horizon > 0 ? s.cumulative_reward / traj.horizon : 0.0;
  s.verify_freq = traj.horizon > 0 ? verification_frequency(traj) : 0.0;
  const VerificationAudit audit = audit_verifications(traj);
  s.mean_ver_roi = audit.mean_roi;
  s.positive_roi_frac = audit.positive_roi_frac;
  s.price_change_frac = audit.changed_price_frac;
  return s;
}

SummaryTable summarize(const std::vector<Trajectory>& trajectories) {
  std::vector<RunSummary> rows;
  for (const auto& traj : trajectories) rows.push_back(summarize_run(traj));
  return aggregate_summaries(std::move(rows));
}

SummaryTable aggregate_summaries(std::vector<RunSummary> seed_rows) {
  SummaryTable table;
  table.seed_rows = std::move(seed_rows);
  std::stable_sort(table.seed_rows.begin(), table.seed_rows.end(), [](const RunSummary& x, const RunSummary& y) {
    if (x.setting_id != y.setting_id) return x.setting_id < y.setting_id;
    if (x.method_id != y.method_id) return x.method_id < y.method_id;
    return x.seed < y.seed;
  });

  std::map<std::pair<std::string, std::string>, std::vector<const RunSummary*>> cells;
  for (const auto& row : table.seed_rows) cells[{row.setting_id, row.method_id}].push_back(&row);

  for (const auto& [key, rows] : cells) {
    AggregateRow agg;
    agg.setting_id = key.first;
    agg.method_id = key.second;
    agg.seeds = static_cast<int>(rows.size());
    agg.rounds = rows.front()->n_rounds;
    const auto n = static_cast<double>(rows.size());
    double cum = 0.0;
    double mean_r = 0.0;
    double vf = 0.0;
    for (const auto* r : rows) {
      cum += r->cumulative_reward;
      mean_r += r->mean_reward;
      vf += r->verify_freq;
    }
    agg.cum_reward_mean = cum / n;
    agg.mean_reward = mean_r / n;
    agg.verify_freq = vf / n;
    if (rows.size() > 1) {
      double ss = 0.0;
      for (const auto* r : rows) ss += (r->cumulative_reward - agg.cum_reward_mean) * (r->cumulative_reward - agg.cum_reward_mean);
      agg.cum_reward_std = std::sqrt(ss / (n - 1.0));
    }
    const auto base = cells.find({key.first, "price_only"});
    if (key.second != "price_only" && base != cells.end()) {
      std::map<std::int64_t, double> base_by_seed;
      for (const auto* r : base->second) base_by_seed[r->seed] = r->cumulative_reward;
      std::vector<double> a;
      std::vector<double> b;
      for (const auto* r : rows) {
        auto it = base_by_seed.find(r->seed);
        if (it == base_by_seed.end()) continue;
        a.push_back(r->cumulative_reward);
        b.push_back(it->second);
      }
      if (a.size() >= 2) agg.p_vs_price_only = paired_directional_test(a, b).p_value;
    }
    table.aggregates.push_back(std::move(agg));
  }
  return table;
}

void write_summary_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "setting,method,seeds,rounds,cum_reward_mean,cum_reward_std,mean_reward,verify_freq,p_vs_price_only\n";
  for (const auto& r : rows) {
    csv::Row row;
    row.add(r.setting_id)
        .add(r.method_id)
        .add(static_cast<long long>(r.seeds))
        .add(static_cast<long long>(r.rounds))
        .add(r.cum_reward_mean, kTableDigits)
        .add(r.cum_reward_std, kTableDigits)
        .add(r.mean_reward, kTableDigits)
        .add(r.verify_freq, kTableDigits)
        .add(r.p_vs_price_only, kTableDigits);
    out << row.str() << '\n';
  }
}

void write_seed_level_csv(std::ostream& out, const std::vector<RunSummary>& rows) {
  out << "setting,method,seed,rounds,cum_reward,mean_reward,verify_freq,mean_ver_roi,positive_roi_frac,"
         "price_change_frac\n";
  for (const auto& r : rows) {
    csv::Row row;
    row.add(r.setting_id)
        .add(r.method_id)
        .add(static_cast<long long>(r.seed))
        .add(static_cast<long long>(r.n_rounds))
        .add(r.cumulative_reward, kTableDigits)
        .add(r.mean_reward, kTableDigits)
        .add(r.verify_freq, kTableDigits)
        .add(r.mean_ver_roi, kTableDigits)
        .add(r.positive_roi_frac, kTableDigits)
        .add(r.price_change_frac, kTableDigits);
    out << row.str() << '\n';
  }
}

void write_round_level_header(std::ostream& out) { out << "setting,method,seed," << kTrajectoryCsvHeader << '\n'; }

void write_round_level_rows(std::ostream& out, const Trajectory& traj) {
  const std::string prefix = traj.setting_id + "," + traj.method_id + "," + std::to_string(traj.seed) + ",";
  for (const auto& rec : traj.records) out << prefix << trajectory_row(rec) << '\n';
}

void write_bucket_csv(std::ostream& out, const std::vector<BucketReport>& rows) {
  out << "setting,bucket,method,mean_reward,n_rounds\n";
  for (const auto& r : rows) {
    csv::Row row;
    row.add(r.setting_id)
        .add(to_string(r.bucket))
        .add(r.method_id)
        .add(r.mean_reward_in_bucket, kTableDigits)
        .add(static_cast<long long>(r.n_rounds_in_bucket));
    out << row.str() << '\n';
  }
}

void write_stratified_csv(std::ostream& out, const std::vector<BucketReport>& rows) {
  out << "setting,method,low,medium,high,n_low,n_medium,n_high\n";
  std::map<std::pair<std::string, std::string>, std::array<const BucketReport*, 3>> wide;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.setting_id, r.method_id);
    if (wide.count(key) == 0) {
      wide[key] = {nullptr, nullptr, nullptr};
      order.push_back(key);
    }
    wide[key][static_cast<std::size_t>(r.bucket)] = &r;
  }
  for (const auto& key : order) {
    const auto& cells = wide[key];
    csv::Row row;
    row.add(key.first).add(key.second);
    for (const auto* c : cells) row.add(c ? std::optional<double>(c->mean_reward_in_bucket) : std::nullopt, kTableDigits);
    for (const auto* c : cells) row.add(static_cast<long long>(c ? c->n_rounds_in_bucket : 0));
    out << row.str() << '\n';
  }
}

void write_clip_tuning_csv(std::ostream& out, const std::map<double, double>& validation_results, double selected) {
  out << "q_max,validation_mean_reward,selected\n";
  for (const auto& [q, reward] : validation_results) {
    csv::Row row;
    row.add(q, kTableDigits).add(reward, kTableDigits).add(static_cast<long long>(q == selected ? 1 : 0));
    out << row.str() << '\n';
  }
}

void write_verification_events_csv(std::ostream& out, const std::vector<VerificationEvent>& events) {
  out << "setting,method,seed,round,price,true_cost,cost_estimate,est_voi,roi,changed_price\n";
  for (const auto& e : events) {
    csv::Row row;
    row.add(e.setting_id)
        .add(e.method_id)
        .add(static_cast<long long>(e.seed))
        .add(static_cast<long long>(e.round))
        .add(e.price, kTableDigits)
        .add(e.true_cost, kTableDigits)
        .add(e.cost_estimate, kTableDigits)
        .add(e.est_voi, kTableDigits)
        .add(e.roi, kTableDigits)
        .add(static_cast<long long>(e.changed_price ? 1 : 0));
    out << row.str() << '\n';
  }
}

void write_roi_summary_csv(std::ostream& out, const std::vector<VerificationEvent>& events) {
  struct Acc {
    long n = 0;
    double roi = 0.0;
    long positive = 0;
    long changed = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> cells;
  for (const auto& e : events) {
    Acc& a = cells[{e.setting_id, e.method_id}];
    ++a.n;
    a.roi += e.roi;
    a.positive += e.roi > 0.0 ? 1 : 0;
    a.changed += e.changed_price ? 1 : 0;
  }
  out << "setting,method,n_events,mean_roi,positive_roi_frac,changed_price_frac\n";
  for (const auto& [key, a] : cells) {
    const auto n = static_cast<double>(a.n);
    csv::Row row;
    row.add(key.first)
        .add(key.second)
        .add(static_cast<long long>(a.n))
        .add(a.roi / n, kTableDigits)
        .add(a.positive / n, kTableDigits)
        .add(a.changed / n, kTableDigits);
    out << row.str() << '\n';
  }
}

}  // namespace nhcrop
