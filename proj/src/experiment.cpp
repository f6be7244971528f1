#include "nhcrop/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <limits>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "nhcrop/csv.hpp"
#include "nhcrop/errors.hpp"
#include "nhcrop/text_proxy.hpp"

namespace nhcrop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class TableSource { None, Corpus, Utility, File };

struct PresetRecipe {
  EnvironmentConfig env;
  TableSource source = TableSource::None;
  int n_slices = 60;
  std::uint64_t table_seed = 0;
  UtilityTableSpec utility;
  std::string path;
};

PresetRecipe recipe_for(const std::string& name) {
  PresetRecipe r;
  EnvironmentConfig& e = r.env;
  e.setting_id = name;
  e.n_task_kinds = 3;
  e.sigma_refined = 0.03;
  e.beta_0 = 1.0;
  e.beta_rel = 2.0;
  e.beta_q = 1.0;
  e.beta_p = 4.0;
  e.beta_c = 1.5;
  e.rho_map = {1.5, -1.0};
  e.kappa_map = {0.5, 1.0};
  if (name == "syn_high") {
    e.mode = EnvMode::Synthetic;
    e.horizon = 420;
    e.n_assets = 60;
    e.sigma_coarse = 0.3;
    e.sigma_drift = 0.01;
    e.c_ver = 0.01;
  } else if (name == "rp_base" || name == "rp_high_dv") {
    e.mode = EnvMode::RealProxy;
    e.horizon = 260;
    e.sigma_coarse = 0.15;
    e.c_ver = 0.02;
    r.source = TableSource::Corpus;
    r.table_seed = 11;
    if (name == "rp_high_dv") {
      e.sigma_coarse = 0.2;
      e.beta_c = 3.0;
      e.kappa_map = {0.2, 2.0};
    }
  } else if (name == "ut_base" || name == "ut_high") {
    e.mode = EnvMode::UtilityGrounded;
    e.horizon = 260;
    e.sigma_coarse = 0.15;
    e.sigma_demand = 0.3;
    e.beta_u = 1.0;
    e.c_ver = 0.02;
    r.source = TableSource::Utility;
    r.utility.seed = 5;
    if (name == "ut_high") {
      r.utility.correlation = 0.6;
      e.beta_u = 1.5;
      e.beta_c = 2.5;
    }
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return r;
}

std::shared_ptr<EnvironmentConfig> build(PresetRecipe r) {
  auto env = std::make_shared<EnvironmentConfig>(std::move(r.env));
  std::shared_ptr<AssetTable> table;
  switch (r.source) {
    case TableSource::None:
      break;
    case TableSource::Corpus: {
      const TextProxyConfig tp = TextProxyConfig::defaults();
      table = std::make_shared<AssetTable>(
          slices_to_asset_table(synthesize_slices(r.n_slices, r.table_seed, tp), env->n_task_kinds, tp));
      break;
    }
    case TableSource::Utility:
      r.utility.n_task_kinds = env->n_task_kinds;
      table = std::make_shared<AssetTable>(gen_utility_table(r.utility));
      break;
    case TableSource::File:
      table = std::make_shared<AssetTable>(load_asset_table(r.path));
      break;
  }
  if (table) {
    env->table = table;
    env->n_assets = static_cast<int>(table->rows.size());
  }
  env->validate();
  return env;
}

// ---------------------------------------------------------------------------
// JSON helpers

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double get_real(const json& v, const std::string& key) {
  if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "Infinity")) {
    return std::numeric_limits<double>::infinity();
  }
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return v.get<int>();
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("'" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> get_reals(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("'" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(get_real(x, key));
  return out;
}

std::vector<std::int64_t> get_seeds(const json& v, const std::string& key) {
  std::vector<std::int64_t> out;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number_integer()) throw ConfigError("'" + key + "' entries must be integers");
      out.push_back(x.get<std::int64_t>());
    }
    return out;
  }
  if (v.is_object()) {
    check_keys(v, {"start", "count"}, key);
    const std::int64_t start = v.contains("start") ? get_int(v["start"], key + ".start") : 0;
    const int count = get_int(v.at("count"), key + ".count");
    if (count < 0) throw ConfigError("'" + key + ".count' must be >= 0");
    for (int i = 0; i < count; ++i) out.push_back(start + i);
    return out;
  }
  throw ConfigError("'" + key + "' must be a list or {start, count}");
}

void apply_env_overrides(PresetRecipe& r, const json& o, const std::string& base_dir) {
  check_keys(o,
             {"horizon",      "n_task_kinds", "n_assets",        "sigma_coarse",  "sigma_refined",  "sigma_drift",
              "sigma_demand", "beta_0",       "beta_rel",        "beta_q",        "beta_u",         "beta_p",
              "beta_c",       "rho_intercept", "rho_slope",      "kappa_intercept", "kappa_slope", "cost_low",
              "cost_high",    "c_ver",        "price_grid",      "asset_table",   "n_slices",       "table_seed",
              "correlation",  "table_assets"},
             "overrides");
  EnvironmentConfig& e = r.env;
  for (const auto& [key, v] : o.items()) {
    if (key == "horizon") e.horizon = get_int(v, key);
    else if (key == "n_task_kinds") e.n_task_kinds = get_int(v, key);
    else if (key == "n_assets") e.n_assets = get_int(v, key);
    else if (key == "sigma_coarse") e.sigma_coarse = get_real(v, key);
    else if (key == "sigma_refined") e.sigma_refined = get_real(v, key);
    else if (key == "sigma_drift") e.sigma_drift = get_real(v, key);
    else if (key == "sigma_demand") e.sigma_demand = get_real(v, key);
    else if (key == "beta_0") e.beta_0 = get_real(v, key);
    else if (key == "beta_rel") e.beta_rel = get_real(v, key);
    else if (key == "beta_q") e.beta_q = get_real(v, key);
    else if (key == "beta_u") e.beta_u = get_real(v, key);
    else if (key == "beta_p") e.beta_p = get_real(v, key);
    else if (key == "beta_c") e.beta_c = get_real(v, key);
    else if (key == "rho_intercept") e.rho_map.intercept = get_real(v, key);
    else if (key == "rho_slope") e.rho_map.slope = get_real(v, key);
    else if (key == "kappa_intercept") e.kappa_map.intercept = get_real(v, key);
    else if (key == "kappa_slope") e.kappa_map.slope = get_real(v, key);
    else if (key == "cost_low") e.cost_low = get_real(v, key);
    else if (key == "cost_high") e.cost_high = get_real(v, key);
    else if (key == "c_ver") e.c_ver = get_real(v, key);
    else if (key == "price_grid") {
      try {
        e.grid = PriceGrid(get_reals(v, key));
      } catch (const std::invalid_argument& err) {
        throw ConfigError(std::string("price_grid: ") + err.what());
      }
    } else if (key == "asset_table") {
      if (e.mode == EnvMode::Synthetic) throw ConfigError("asset_table given for a synthetic setting");
      fs::path p(get_string(v, key));
      if (p.is_relative()) p = fs::path(base_dir) / p;
      r.source = TableSource::File;
      r.path = p.string();
    } else if (key == "n_slices") r.n_slices = get_int(v, key);
    else if (key == "table_seed") {
      r.table_seed = static_cast<std::uint64_t>(get_int(v, key));
      r.utility.seed = r.table_seed;
    } else if (key == "correlation") r.utility.correlation = get_real(v, key);
    else if (key == "table_assets") r.utility.n_assets = get_int(v, key);
  }
}

void apply_policy(PolicySpec& p, const json& o) {
  check_keys(o, {"lambda_risk", "gamma_margin", "mc_samples", "tpiv_threshold", "random_verify_prob",
                 "disable_risk_fallback"},
             "policy");
  for (const auto& [key, v] : o.items()) {
    if (key == "lambda_risk") p.lambda_risk = get_real(v, key);
    else if (key == "gamma_margin") p.gamma_margin = get_real(v, key);
    else if (key == "mc_samples") p.mc_samples = get_int(v, key);
    else if (key == "tpiv_threshold") p.tpiv_threshold = get_real(v, key);
    else if (key == "random_verify_prob") p.random_verify_prob = get_real(v, key);
    else if (key == "disable_risk_fallback") p.disable_risk_fallback = get_bool(v, key);
  }
}

void apply_demand(DemandParams& d, const json& o) {
  check_keys(o, {"beta0", "learn_rate", "ridge", "ridge_l2", "q_max"}, "demand");
  for (const auto& [key, v] : o.items()) {
    if (key == "beta0") d.beta0 = get_real(v, key);
    else if (key == "learn_rate") d.learn_rate = get_real(v, key);
    else if (key == "ridge") d.ridge = get_real(v, key);
    else if (key == "ridge_l2") d.ridge_l2 = get_real(v, key);
    else if (key == "q_max") d.q_max = get_real(v, key);
  }
}

void apply_belief(SignalNoiseParams& b, const json& o) {
  check_keys(o, {"alpha", "rho_decay", "sigma_ver_floor", "sigma_unver_floor"}, "belief");
  for (const auto& [key, v] : o.items()) {
    if (key == "alpha") b.alpha = get_real(v, key);
    else if (key == "rho_decay") b.rho_decay = get_real(v, key);
    else if (key == "sigma_ver_floor") b.sigma_ver_floor = get_real(v, key);
    else if (key == "sigma_unver_floor") b.sigma_unver_floor = get_real(v, key);
  }
}

std::vector<std::int64_t> default_seeds(std::int64_t start, int count) {
  std::vector<std::int64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(start + i);
  return s;
}

// ---------------------------------------------------------------------------
// Output

fs::path output_root(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("NHCROP_OUT"); env && *env) return env;
  return "out";
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

bool method_clipped(const std::string& id) { return spec_for_method(id).clipped; }

bool method_verifies(const std::string& id) {
  const PolicySpec s = spec_for_method(id);
  return s.verification_enabled && s.kind != PolicyKind::PriceOnly && s.kind != PolicyKind::RiskAverse &&
         s.kind != PolicyKind::OracleFree;
}

struct Cell {
  std::size_t setting = 0;
  std::string method;
  std::int64_t seed = 0;
};

struct CellResult {
  RunSummary summary;
  std::vector<double> rewards;
  std::vector<double> relevance;
  std::vector<VerificationEvent> events;
  std::string round_rows;
};

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"syn_high", "rp_base", "rp_high_dv", "ut_base", "ut_high"};
  return names;
}

std::shared_ptr<EnvironmentConfig> make_preset(const std::string& name) { return build(recipe_for(name)); }

void ExperimentConfig::validate() const {
  if (settings.empty()) throw ConfigError("no settings");
  if (methods.empty()) throw ConfigError("no methods");
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  std::set<std::string> ids;
  for (const auto& s : settings) {
    if (!ids.insert(s->setting_id).second) throw ConfigError("duplicate setting id '" + s->setting_id + "'");
  }
  std::set<std::string> ms;
  for (const auto& m : methods) {
    try {
      spec_for_method(m, policy);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!ms.insert(m).second) throw ConfigError("duplicate method '" + m + "'");
  }
  const std::set<std::int64_t> eval(seeds.begin(), seeds.end());
  if (eval.size() != seeds.size()) throw ConfigError("duplicate evaluation seed");
  for (auto s : seeds) {
    if (s < 0) throw ConfigError("seeds must be >= 0");
  }
  for (auto s : validation_seeds) {
    if (s < 0) throw ConfigError("validation seeds must be >= 0");
    if (eval.count(s)) throw ConfigError("validation seed " + std::to_string(s) + " is also an evaluation seed");
  }
  const bool any_clipped = std::any_of(methods.begin(), methods.end(), method_clipped);
  if (tune_clip && any_clipped) {
    if (validation_seeds.empty()) throw ConfigError("clip tuning needs validation seeds");
    if (clip_grid.empty()) throw ConfigError("clip_grid is empty");
    for (double q : clip_grid) {
      if (!(q > 0.0)) throw ConfigError("clip_grid values must be > 0");
    }
  }
  try {
    policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(demand.q_max > 0.0)) throw ConfigError("q_max must be > 0");
}

ExperimentConfig default_config(bool with_oracles) {
  ExperimentConfig cfg;
  for (const auto& name : preset_names()) cfg.settings.push_back(make_preset(name));
  cfg.methods = default_methods(with_oracles);
  cfg.seeds = default_seeds(0, 30);
  cfg.validation_seeds = default_seeds(1000, 5);
  return cfg;
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root,
             {"settings", "methods", "with_oracles", "policy", "demand", "belief", "seeds", "validation_seeds",
              "clip_grid", "tune_clip", "output_dir", "parallelism", "round_level"},
             "config");
  ExperimentConfig cfg;
  cfg.seeds = default_seeds(0, 30);
  cfg.validation_seeds = default_seeds(1000, 5);
  const bool with_oracles = root.contains("with_oracles") && get_bool(root["with_oracles"], "with_oracles");
  cfg.methods = default_methods(with_oracles);

  try {
    if (root.contains("policy")) apply_policy(cfg.policy, root["policy"]);
    if (root.contains("demand")) apply_demand(cfg.demand, root["demand"]);
    if (root.contains("belief")) apply_belief(cfg.belief, root["belief"]);
    if (root.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : root["methods"]) cfg.methods.push_back(get_string(m, "methods"));
    }
    if (root.contains("seeds")) cfg.seeds = get_seeds(root["seeds"], "seeds");
    if (root.contains("validation_seeds")) cfg.validation_seeds = get_seeds(root["validation_seeds"], "validation_seeds");
    if (root.contains("clip_grid")) cfg.clip_grid = get_reals(root["clip_grid"], "clip_grid");
    if (root.contains("tune_clip")) cfg.tune_clip = get_bool(root["tune_clip"], "tune_clip");
    if (root.contains("output_dir")) {
      fs::path p(get_string(root["output_dir"], "output_dir"));
      if (p.is_relative()) p = fs::path(base_dir) / p;
      cfg.output_dir = p.lexically_normal().string();
    }
    if (root.contains("parallelism")) cfg.parallelism = get_int(root["parallelism"], "parallelism");
    if (root.contains("round_level")) cfg.round_level = get_bool(root["round_level"], "round_level");

    const json settings = root.contains("settings") ? root["settings"] : json(preset_names());
    if (!settings.is_array()) throw ConfigError("'settings' must be an array");
    for (const auto& entry : settings) {
      PresetRecipe r;
      if (entry.is_string()) {
        r = recipe_for(entry.get<std::string>());
      } else {
        check_keys(entry, {"preset", "id", "overrides"}, "settings entry");
        r = recipe_for(get_string(entry.at("preset"), "preset"));
        if (entry.contains("id")) r.env.setting_id = get_string(entry["id"], "id");
        if (entry.contains("overrides")) apply_env_overrides(r, entry["overrides"], base_dir);
      }
      cfg.settings.push_back(build(std::move(r)));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), fs::path(path).parent_path().string());
}

std::vector<std::int64_t> parse_seed_list(const std::string& text) {
  std::vector<std::int64_t> out;
  try {
    if (const auto colon = text.find(':'); colon != std::string::npos) {
      const long long start = csv::parse_int(text.substr(0, colon));
      const long long count = csv::parse_int(text.substr(colon + 1));
      for (long long i = 0; i < count; ++i) out.push_back(start + i);
      return out;
    }
    for (const auto& f : csv::split(text)) out.push_back(csv::parse_int(f));
  } catch (const DataError&) {
    throw ConfigError("cannot parse seed list '" + text + "'");
  }
  return out;
}

RunSpec make_run_spec(const ExperimentConfig& cfg, const std::shared_ptr<const EnvironmentConfig>& env,
                      const std::string& method_id, double q_max) {
  RunSpec spec;
  spec.env = env;
  spec.method_id = method_id;
  spec.policy = spec_for_method(method_id, cfg.policy);
  spec.demand = cfg.demand;
  spec.demand.q_max = q_max;
  spec.belief = cfg.belief;
  return spec;
}

ClipTuning tune_clip(const ExperimentConfig& cfg) {
  ClipTuning result;
  result.selected = cfg.demand.q_max;
  std::vector<std::string> clipped;
  for (const auto& m : cfg.methods) {
    if (method_clipped(m)) clipped.push_back(m);
  }
  if (!cfg.tune_clip || clipped.empty()) return result;

  struct Job {
    double q;
    std::size_t setting;
    std::string method;
    std::int64_t seed;
  };
  std::vector<Job> jobs;
  for (double q : cfg.clip_grid) {
    for (std::size_t s = 0; s < cfg.settings.size(); ++s) {
      for (const auto& m : clipped) {
        for (auto seed : cfg.validation_seeds) jobs.push_back({q, s, m, seed});
      }
    }
  }
  std::map<double, std::pair<double, long>> acc;
  ordered_parallel<double>(
      jobs.size(), cfg.parallelism,
      [&](std::size_t i) {
        const Job& j = jobs[i];
        RunSpec spec = make_run_spec(cfg, cfg.settings[j.setting], j.method, j.q);
        spec.counterfactuals = false;
        spec.info_values = false;
        const Trajectory t = run_trajectory(spec, j.seed);
        return cumulative_reward(t) / t.horizon;
      },
      [&](std::size_t i, double mean_reward) {
        auto& a = acc[jobs[i].q];
        a.first += mean_reward;
        a.second += 1;
      });
  for (const auto& [q, a] : acc) result.validation_mean_reward[q] = a.first / static_cast<double>(a.second);
  result.selected = select_clip(result.validation_mean_reward);
  return result;
}

AuditResult run_audit(const ExperimentConfig& cfg, AuditOutputs outputs) {
  cfg.validate();
  AuditResult result;
  result.clip = tune_clip(cfg);

  std::vector<std::string> methods = cfg.methods;
  if (outputs == AuditOutputs::Stratify && std::find(methods.begin(), methods.end(), "price_only") == methods.end()) {
    methods.insert(methods.begin(), "price_only");
  }
  if (outputs == AuditOutputs::RoiAudit) {
    methods.erase(std::remove_if(methods.begin(), methods.end(), [](const auto& m) { return !method_verifies(m); }),
                  methods.end());
    if (methods.empty()) throw ConfigError("roi-audit needs at least one verifying method");
  }

  std::vector<Cell> cells;
  for (std::size_t s = 0; s < cfg.settings.size(); ++s) {
    for (const auto& m : methods) {
      for (auto seed : cfg.seeds) cells.push_back({s, m, seed});
    }
  }

  const fs::path root = output_root(cfg);
  const bool full = outputs == AuditOutputs::Full;
  const bool write_rounds = full && cfg.round_level;
  std::ofstream rounds;
  if (write_rounds) {
    rounds = open_out(root / "raw" / "round_level_results.csv");
    write_round_level_header(rounds);
  }

  std::map<std::pair<std::size_t, std::string>, std::map<std::int64_t, std::vector<double>>> rewards;
  std::map<std::size_t, std::map<std::int64_t, std::vector<double>>> relevance;

  ordered_parallel<CellResult>(
      cells.size(), cfg.parallelism,
      [&](std::size_t i) {
        const Cell& c = cells[i];
        RunSpec spec = make_run_spec(cfg, cfg.settings[c.setting], c.method,
                                     spec_for_method(c.method).clipped ? result.clip.selected : cfg.demand.q_max);
        spec.counterfactuals = method_verifies(c.method);
        const Trajectory t = run_trajectory(spec, c.seed);
        CellResult r;
        r.summary = summarize_run(t);
        for (const auto& rec : t.records) r.rewards.push_back(rec.reward);
        if (c.method == "price_only") {
          for (const auto& rec : t.records) r.relevance.push_back(std::fabs(rec.info_value.value_or(0.0)));
        }
        r.events = audit_verifications(t).events;
        if (write_rounds) {
          std::ostringstream os;
          write_round_level_rows(os, t);
          r.round_rows = os.str();
        }
        return r;
      },
      [&](std::size_t i, CellResult r) {
        const Cell& c = cells[i];
        if (write_rounds) rounds << r.round_rows;
        result.summary.seed_rows.push_back(r.summary);
        rewards[{c.setting, c.method}][c.seed] = std::move(r.rewards);
        if (!r.relevance.empty()) relevance[c.setting][c.seed] = std::move(r.relevance);
        result.events.insert(result.events.end(), std::make_move_iterator(r.events.begin()),
                             std::make_move_iterator(r.events.end()));
      });

  result.summary = aggregate_summaries(std::move(result.summary.seed_rows));

  for (std::size_t s = 0; s < cfg.settings.size(); ++s) {
    const auto rel = relevance.find(s);
    if (rel == relevance.end()) continue;
    const RelevanceBuckets buckets = assign_buckets(rel->second);
    for (const auto& m : methods) {
      const auto rep = bucket_report(buckets, cfg.settings[s]->setting_id, m, rewards.at({s, m}));
      result.buckets.insert(result.buckets.end(), rep.begin(), rep.end());
    }
  }

  if (full || outputs == AuditOutputs::Stratify) {
    auto b = open_out(root / "tables" / "method_independent_relevance_buckets.csv");
    write_bucket_csv(b, result.buckets);
    auto st = open_out(root / "tables" / "final_method_independent_stratified.csv");
    write_stratified_csv(st, result.buckets);
  }
  if (full) {
    auto sum = open_out(root / "tables" / "final_setting_method_summary.csv");
    write_summary_csv(sum, result.summary.aggregates);
    auto seed = open_out(root / "raw" / "seed_level_results.csv");
    write_seed_level_csv(seed, result.summary.seed_rows);
    auto clip = open_out(root / "tables" / "clip_tuning_summary.csv");
    write_clip_tuning_csv(clip, result.clip.validation_mean_reward, result.clip.selected);
  }
  if (full || outputs == AuditOutputs::RoiAudit) {
    auto ev = open_out(root / "tables" / "verification_events.csv");
    write_verification_events_csv(ev, result.events);
  }
  if (outputs == AuditOutputs::RoiAudit) {
    auto rep = open_out(root / "tables" / "representative_verification_events.csv");
    write_verification_events_csv(rep, representative_events(result.events, 20));
    auto sum = open_out(root / "tables" / "verification_roi_summary.csv");
    write_roi_summary_csv(sum, result.events);
  }
  if (write_rounds) {
    rounds.flush();
    if (!rounds) throw DataError("failed writing round-level results");
  }
  return result;
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "clip") return SweepAxis::Clip;
  if (text == "sigma_coarse") return SweepAxis::SigmaCoarse;
  if (text == "c_ver") return SweepAxis::CVer;
  if (text == "tau") return SweepAxis::Tau;
  throw ConfigError("unknown sweep axis '" + text + "'");
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Clip:
      return "clip";
    case SweepAxis::SigmaCoarse:
      return "sigma_coarse";
    case SweepAxis::CVer:
      return "c_ver";
    case SweepAxis::Tau:
      return "tau";
  }
  return "clip";
}

SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values) {
  cfg.validate();
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (cfg.validation_seeds.empty()) throw ConfigError("sweep runs on validation seeds; none configured");
  for (double v : values) {
    if (std::isnan(v)) throw ConfigError("sweep value is NaN");
    if (axis == SweepAxis::Clip && !(v > 0.0)) throw ConfigError("clip values must be > 0");
    if ((axis == SweepAxis::SigmaCoarse || axis == SweepAxis::CVer) && !(v >= 0.0)) {
      throw ConfigError("sweep values must be >= 0");
    }
  }

  struct Job {
    std::size_t value;
    std::size_t setting;
    std::string method;
    std::int64_t seed;
  };
  // Per (value, setting) environment variant.
  std::vector<std::vector<std::shared_ptr<const EnvironmentConfig>>> envs(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) {
    for (const auto& base : cfg.settings) {
      if (axis == SweepAxis::SigmaCoarse || axis == SweepAxis::CVer) {
        auto e = std::make_shared<EnvironmentConfig>(*base);
        (axis == SweepAxis::SigmaCoarse ? e->sigma_coarse : e->c_ver) = values[v];
        e->validate();
        envs[v].push_back(e);
      } else {
        envs[v].push_back(base);
      }
    }
  }
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < values.size(); ++v) {
    for (std::size_t s = 0; s < cfg.settings.size(); ++s) {
      for (const auto& m : cfg.methods) {
        for (auto seed : cfg.validation_seeds) jobs.push_back({v, s, m, seed});
      }
    }
  }

  const fs::path root = output_root(cfg);
  const std::string axis_name(to_string(axis));
  std::ofstream rounds;
  if (cfg.round_level) {
    rounds = open_out(root / "raw" / ("sweep_" + axis_name + "_rounds.csv"));
    rounds << "axis_value,";
    write_round_level_header(rounds);
  }

  struct Out {
    double cum;
    double mean;
    std::string rows;
  };
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::pair<double, double>> cum_and_mean;
  std::map<std::tuple<std::size_t, std::size_t, std::string>, int> counts;
  ordered_parallel<Out>(
      jobs.size(), cfg.parallelism,
      [&](std::size_t i) {
        const Job& j = jobs[i];
        ExperimentConfig local = cfg;
        if (axis == SweepAxis::Tau) local.policy.tpiv_threshold = values[j.value];
        const bool clipped = spec_for_method(j.method).clipped;
        const double q = axis == SweepAxis::Clip && clipped ? values[j.value] : cfg.demand.q_max;
        RunSpec spec = make_run_spec(local, envs[j.value][j.setting], j.method, q);
        spec.counterfactuals = false;
        const Trajectory t = run_trajectory(spec, j.seed);
        Out o{cumulative_reward(t), cumulative_reward(t) / t.horizon, {}};
        if (cfg.round_level) {
          std::ostringstream os;
          write_round_level_rows(os, t);
          const std::string prefix = format_real(values[j.value], kTableDigits) + ",";
          std::istringstream lines(os.str());
          std::string line;
          while (std::getline(lines, line)) o.rows += prefix + line + "\n";
        }
        return o;
      },
      [&](std::size_t i, Out o) {
        const Job& j = jobs[i];
        const auto key = std::make_tuple(j.value, j.setting, j.method);
        cum_and_mean[key].first += o.cum;
        cum_and_mean[key].second += o.mean;
        counts[key] += 1;
        if (cfg.round_level) rounds << o.rows;
      });

  SweepResult result;
  for (std::size_t v = 0; v < values.size(); ++v) {
    for (std::size_t s = 0; s < cfg.settings.size(); ++s) {
      for (const auto& m : cfg.methods) {
        const auto key = std::make_tuple(v, s, m);
        const double n = counts.at(key);
        result.rows.push_back(
            {cfg.settings[s]->setting_id, values[v], m, cum_and_mean[key].second / n, cum_and_mean[key].first / n});
      }
    }
  }
  std::map<double, double> clip_scores;
  if (axis == SweepAxis::Clip) {
    std::map<double, std::pair<double, int>> acc;
    for (const auto& row : result.rows) {
      if (!spec_for_method(row.method_id).clipped) continue;
      acc[row.value].first += row.mean_reward;
      acc[row.value].second += 1;
    }
    for (const auto& [q, a] : acc) clip_scores[q] = a.first / a.second;
    if (!clip_scores.empty()) result.selected_clip = select_clip(clip_scores);
  }

  auto out = open_out(root / "tables" / ("sweep_" + axis_name + ".csv"));
  out << "setting,axis,value,method,seeds,mean_reward,cum_reward_mean\n";
  const auto n_seeds = static_cast<long long>(cfg.validation_seeds.size());
  for (const auto& r : result.rows) {
    csv::Row row;
    row.add(r.setting_id)
        .add(axis_name)
        .add(r.value, kTableDigits)
        .add(r.method_id)
        .add(n_seeds)
        .add(r.mean_reward, kTableDigits)
        .add(r.cum_reward_mean, kTableDigits);
    out << row.str() << '\n';
  }
  if (result.selected_clip) {
    csv::Row row;
    row.add("all")
        .add(axis_name)
        .add(*result.selected_clip, kTableDigits)
        .add("select_clip")
        .add(n_seeds)
        .add(clip_scores.at(*result.selected_clip), kTableDigits)
        .add(std::optional<double>{}, kTableDigits);
    out << row.str() << '\n';
  }
  if (cfg.round_level) {
    rounds.flush();
    if (!rounds) throw DataError("failed writing sweep round logs");
  }
  return result;
}

}  // namespace nhcrop
