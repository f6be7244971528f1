#include <algorithm>
#include <chrono>
#include <limits>
#include <sstream>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nhcrop/errors.hpp"
#include "nhcrop/experiment.hpp"
#include "nhcrop/text_proxy.hpp"

using namespace nhcrop;

namespace {

struct CommonOptions {
  std::string config;
  std::string out;
  std::string seeds;
  int parallel = 0;
  std::vector<std::string> presets;
  bool with_oracles = false;
  bool no_round_level = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON experiment config");
  cmd->add_option("--out", o.out, "output directory (default: config, then $NHCROP_OUT, then ./out)");
  cmd->add_option("--seeds", o.seeds, "evaluation seeds: '0,1,2' or 'start:count'");
  cmd->add_option("--parallel", o.parallel, "worker threads");
  cmd->add_option("--preset", o.presets, "restrict to these setting presets (repeatable)");
  cmd->add_flag("--with-oracles", o.with_oracles, "add the hindsight oracle methods");
  cmd->add_flag("--no-round-level", o.no_round_level, "skip round-level logs");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? default_config(o.with_oracles) : load_config(o.config);
  if (!o.config.empty() && o.with_oracles) {
    for (const auto& m : default_methods(true)) {
      if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end()) cfg.methods.push_back(m);
    }
  }
  if (!o.presets.empty()) {
    std::vector<std::shared_ptr<const EnvironmentConfig>> picked;
    for (const auto& name : o.presets) {
      auto it = std::find_if(cfg.settings.begin(), cfg.settings.end(),
                             [&](const auto& s) { return s->setting_id == name; });
      picked.push_back(it != cfg.settings.end() ? *it : make_preset(name));
    }
    cfg.settings = std::move(picked);
  }
  if (!o.seeds.empty()) cfg.seeds = parse_seed_list(o.seeds);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.parallel != 0) cfg.parallelism = o.parallel;
  if (o.no_round_level) cfg.round_level = false;
  cfg.validate();
  return cfg;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::string field;
  std::istringstream in(text);
  while (std::getline(in, field, ',')) {
    if (field.empty()) continue;
    try {
      out.push_back(field == "inf" ? std::numeric_limits<double>::infinity() : std::stod(field));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse sweep value '" + field + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware data pricing benchmark with verification decisions"};
  app.require_subcommand(1);

  CommonOptions audit_opt, strat_opt, roi_opt, sweep_opt;
  auto* audit = app.add_subcommand("run-audit", "run every (setting, method, seed) cell and write all tables");
  add_common(audit, audit_opt);
  auto* strat = app.add_subcommand("stratify", "decision-relevance bucket tables only");
  add_common(strat, strat_opt);
  auto* roi = app.add_subcommand("roi-audit", "verification ROI audit of the verifying methods");
  add_common(roi, roi_opt);

  auto* sweep = app.add_subcommand("sweep", "validation-seed sweep over one axis");
  add_common(sweep, sweep_opt);
  std::string axis;
  std::string values;
  sweep->add_option("--axis", axis, "clip | sigma_coarse | c_ver | tau")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();

  auto* gen = app.add_subcommand("gen-assets", "build an asset table CSV");
  std::string slice_dir, out_file, write_slices;
  int tasks = 3, n_assets = 720, n_slices = 0;
  double correlation = 0.0;
  std::uint64_t table_seed = 0;
  gen->add_option("--slices", slice_dir, "directory of label<TAB>text slice files");
  gen->add_option("--synthetic-corpus", n_slices, "generate this many text slices instead of reading them");
  gen->add_option("--write-slices", write_slices, "also write the generated slices here");
  gen->add_flag("--synthetic-utility", "generate a utility-grounded table");
  gen->add_option("--correlation", correlation, "utility-cost correlation of the generated table");
  gen->add_option("--assets", n_assets, "assets of the generated utility table");
  gen->add_option("--tasks", tasks, "task kinds");
  gen->add_option("--seed", table_seed, "generator seed");
  gen->add_option("--out", out_file, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    if (*audit || *strat || *roi) {
      const CommonOptions& o = *audit ? audit_opt : (*strat ? strat_opt : roi_opt);
      const ExperimentConfig cfg = resolve(o);
      const AuditOutputs mode = *audit ? AuditOutputs::Full : (*strat ? AuditOutputs::Stratify : AuditOutputs::RoiAudit);
      const AuditResult r = run_audit(cfg, mode);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "%zu cells, shared q_max %.12g, %.1fs\n", r.summary.seed_rows.size(), r.clip.selected, dt);
    } else if (*sweep) {
      const ExperimentConfig cfg = resolve(sweep_opt);
      const SweepResult r = run_sweep(cfg, parse_sweep_axis(axis), parse_values(values));
      std::fprintf(stderr, "%zu sweep rows\n", r.rows.size());
      if (r.selected_clip) std::fprintf(stderr, "selected q_max %.12g\n", *r.selected_clip);
    } else if (*gen) {
      AssetTable table;
      const bool utility = gen->count("--synthetic-utility") > 0;
      if (utility) {
        UtilityTableSpec spec;
        spec.n_assets = n_assets;
        spec.n_task_kinds = tasks;
        spec.correlation = correlation;
        spec.seed = table_seed;
        table = gen_utility_table(spec);
      } else {
        const TextProxyConfig tp = TextProxyConfig::defaults();
        std::vector<Slice> slices;
        if (n_slices > 0) {
          slices = synthesize_slices(n_slices, table_seed, tp);
          if (!write_slices.empty()) write_slice_directory(write_slices, slices);
        } else if (!slice_dir.empty()) {
          slices = read_slice_directory(slice_dir);
        } else {
          throw ConfigError("gen-assets needs --slices, --synthetic-corpus or --synthetic-utility");
        }
        table = slices_to_asset_table(slices, tasks, tp);
      }
      std::ofstream out(out_file, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write " + out_file);
      write_asset_table_csv(out, table);
      if (!out.flush()) throw DataError("failed writing " + out_file);
      std::fprintf(stderr, "%zu assets written to %s\n", table.rows.size(), out_file.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
