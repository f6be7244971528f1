#include "nhcrop/cost_belief.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nhcrop/counter_rng.hpp"

namespace nhcrop {

void SignalNoiseParams::validate() const {
  if (!(sigma_coarse >= 0.0) || !(sigma_refined >= 0.0)) throw std::invalid_argument("noise std must be >= 0");
  if (sigma_refined > sigma_coarse) throw std::invalid_argument("sigma_refined must not exceed sigma_coarse");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
  if (!(rho_decay >= 1.0)) throw std::invalid_argument("rho_decay must be >= 1");
  if (!(sigma_ver_floor > 0.0) || !(sigma_unver_floor > 0.0)) throw std::invalid_argument("sigma floors must be > 0");
  if (sigma_ver_floor > sigma_unver_floor) throw std::invalid_argument("sigma_ver_floor must not exceed sigma_unver_floor");
}

CostBelief update_mean(const CostBelief& belief, double signal_value, const SignalNoiseParams& params) {
  const double mu = (1.0 - params.alpha) * belief.mu + params.alpha * signal_value;
  return {std::clamp(mu, 0.0, 1.0), belief.sigma};
}

CostBelief update_sigma(const CostBelief& belief, bool verified, const SignalNoiseParams& params) {
  if (verified) return {belief.mu, params.sigma_ver_floor};
  return {belief.mu, std::max(params.rho_decay * belief.sigma, params.sigma_unver_floor)};
}

CostBelief absorb_refined(const CostBelief& belief, double refined_signal, const SignalNoiseParams& params) {
  return {std::clamp(refined_signal, 0.0, 1.0), update_sigma(belief, true, params).sigma};
}

double RefinedSignalDistribution::sample(const CounterRng& rng, std::uint64_t round, std::uint64_t k) const {
  if (stddev == 0.0) return std::clamp(mean, 0.0, 1.0);
  return std::clamp(mean + stddev * rng.normal(round, 0, k), 0.0, 1.0);
}

RefinedSignalDistribution refined_signal_distribution(const CostBelief& belief, const SignalNoiseParams& params) {
  return {belief.mu, std::sqrt(belief.sigma * belief.sigma + params.sigma_refined * params.sigma_refined)};
}

CostBelief BeliefStore::lookup_or_init(std::int64_t asset_id, double coarse_estimate) {
  auto it = beliefs_.find(asset_id);
  if (it != beliefs_.end()) return it->second;
  const CostBelief init{std::clamp(coarse_estimate, 0.0, 1.0), params_.sigma_coarse};
  beliefs_.emplace(asset_id, init);
  return init;
}

}  // namespace nhcrop
