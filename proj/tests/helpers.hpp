#pragma once

#include <memory>
#include <string>

#include "nhcrop/environment.hpp"
#include "nhcrop/runner.hpp"

namespace testutil {

// Small synthetic market that exercises every code path quickly.
inline std::shared_ptr<nhcrop::EnvironmentConfig> small_market(int horizon = 120, std::string id = "unit_syn") {
  auto e = std::make_shared<nhcrop::EnvironmentConfig>();
  e->setting_id = std::move(id);
  e->mode = nhcrop::EnvMode::Synthetic;
  e->horizon = horizon;
  e->n_task_kinds = 3;
  e->n_assets = 12;
  e->sigma_coarse = 0.3;
  e->sigma_refined = 0.03;
  e->sigma_drift = 0.01;
  e->beta_0 = 1.0;
  e->beta_rel = 2.0;
  e->beta_q = 1.0;
  e->beta_p = 4.0;
  e->beta_c = 1.5;
  e->rho_map = {1.5, -1.0};
  e->kappa_map = {0.5, 1.0};
  e->c_ver = 0.01;
  return e;
}

inline nhcrop::RunSpec spec_for(std::shared_ptr<const nhcrop::EnvironmentConfig> env, const std::string& method,
                                const nhcrop::PolicySpec& base = {}) {
  nhcrop::RunSpec s;
  s.env = std::move(env);
  s.method_id = method;
  s.policy = nhcrop::spec_for_method(method, base);
  return s;
}

inline nhcrop::TaskContext context(int kind, double budget, double privacy) {
  nhcrop::TaskContext c;
  c.task_kind = kind;
  c.budget_level = budget;
  c.privacy_sensitivity = privacy;
  return c;
}

inline nhcrop::Asset asset(double quality, double size, double rarity, std::vector<double> rel) {
  nhcrop::Asset a;
  a.quality = quality;
  a.size_norm = size;
  a.rarity = rarity;
  a.relevance_profile = std::move(rel);
  return a;
}

}  // namespace testutil
