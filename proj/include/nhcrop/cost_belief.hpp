#pragma once

#include <cstdint>
#include <unordered_map>

namespace nhcrop {

class CounterRng;

struct SignalNoiseParams {
  double sigma_coarse = 0.2;       // std of the coarse-estimate noise
  double sigma_refined = 0.03;     // std of the refined-signal noise
  double alpha = 0.2;              // EMA rate for unverified rounds
  double rho_decay = 1.02;         // growth of sigma on unverified rounds
  double sigma_ver_floor = 0.02;   // sigma right after a verification
  double sigma_unver_floor = 0.05; // lower bound of sigma otherwise

  // Throws std::invalid_argument on out-of-range or inconsistent values.
  void validate() const;
};

struct CostBelief {
  double mu = 0.0;
  double sigma = 0.0;
};

// EMA toward the observed signal, result clipped to [0,1]. Sigma untouched.
CostBelief update_mean(const CostBelief& belief, double signal_value, const SignalNoiseParams& params);

// Reset to the verified floor, or grow by rho down-bounded by the unverified floor.
CostBelief update_sigma(const CostBelief& belief, bool verified, const SignalNoiseParams& params);

// Belief after a refined signal: full replacement of the mean and sigma reset.
CostBelief absorb_refined(const CostBelief& belief, double refined_signal, const SignalNoiseParams& params);

// Predictive distribution of the refined signal, Normal(mu, sigma^2 + sigma_refined^2)
// with draws clipped to [0,1].
struct RefinedSignalDistribution {
  double mean = 0.0;
  double stddev = 0.0;

  // Draw k of a stream; clip(mean + stddev * z, 0, 1).
  double sample(const CounterRng& rng, std::uint64_t round, std::uint64_t k) const;
};

RefinedSignalDistribution refined_signal_distribution(const CostBelief& belief, const SignalNoiseParams& params);

// Per-asset beliefs that persist across reappearances within one run.
class BeliefStore {
 public:
  explicit BeliefStore(SignalNoiseParams params) : params_(params) {}

  // Existing belief, or (first coarse estimate, sigma_coarse) on first encounter.
  CostBelief lookup_or_init(std::int64_t asset_id, double coarse_estimate);
  void put(std::int64_t asset_id, const CostBelief& belief) { beliefs_[asset_id] = belief; }
  bool contains(std::int64_t asset_id) const { return beliefs_.count(asset_id) != 0; }
  const SignalNoiseParams& params() const { return params_; }

 private:
  SignalNoiseParams params_;
  std::unordered_map<std::int64_t, CostBelief> beliefs_;
};

}  // namespace nhcrop
