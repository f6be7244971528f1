#include <cstdlib>
#include <set>

#include "doctest.h"
#include "fs_util.hpp"
#include "nhcrop/errors.hpp"
#include "nhcrop/experiment.hpp"
#include "nhcrop/text_proxy.hpp"

using namespace nhcrop;
namespace fs = std::filesystem;

namespace {

std::string mini_json(const fs::path& out, const std::string& seeds = "[0, 1]", int parallelism = 1,
                      const std::string& methods = R"(["price_only", "nhcrop_clip"])") {
  return R"({"settings": [{"preset": "syn_high", "id": "mini", "overrides": {"horizon": 20}}],
    "methods": )" + methods + R"(, "seeds": )" + seeds + R"(, "validation_seeds": [100, 101],
    "clip_grid": [0.5, 0.8], "parallelism": )" + std::to_string(parallelism) + R"(, "output_dir": ")" +
         out.generic_string() + "\"}";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NHCROP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("minimal audit counts") {
  const fs::path out = testutil::fresh_dir("mini");
  const ExperimentConfig cfg = parse_config(mini_json(out));
  const AuditResult r = run_audit(cfg);
  CHECK(r.summary.seed_rows.size() == 4);
  CHECK(r.summary.aggregates.size() == 2);
  for (const char* f : {"tables/final_setting_method_summary.csv", "tables/method_independent_relevance_buckets.csv",
                        "tables/clip_tuning_summary.csv", "raw/seed_level_results.csv", "raw/round_level_results.csv",
                        "tables/verification_events.csv"}) {
    CHECK_MESSAGE(fs::exists(out / f), f);
  }
  CHECK(testutil::lines(testutil::slurp(out / "raw/round_level_results.csv")).size() == 1 + 4 * 20);
  CHECK(testutil::lines(testutil::slurp(out / "raw/seed_level_results.csv")).size() == 1 + 4);
}

TEST_CASE("reruns and worker counts give identical bytes") {
  const fs::path a = testutil::fresh_dir("det_a");
  const fs::path b = testutil::fresh_dir("det_b");
  const fs::path c = testutil::fresh_dir("det_c");
  const std::string methods = R"(["price_only", "nhcrop_clip", "tpiv", "oracle_pos_roi"])";
  run_audit(parse_config(mini_json(a, "[0, 1, 2]", 1, methods)));
  run_audit(parse_config(mini_json(b, "[0, 1, 2]", 1, methods)));
  run_audit(parse_config(mini_json(c, "[0, 1, 2]", 8, methods)));
  const auto ta = testutil::tree(a);
  CHECK(ta.size() >= 6);
  CHECK(ta == testutil::tree(b));
  CHECK(ta == testutil::tree(c));
}

TEST_CASE("removing a seed changes only that seed's rows") {
  const fs::path a = testutil::fresh_dir("iso_a");
  const fs::path b = testutil::fresh_dir("iso_b");
  run_audit(parse_config(mini_json(a, "[0, 1, 2]")));
  run_audit(parse_config(mini_json(b, "[0, 2]")));
  for (const char* f : {"raw/seed_level_results.csv", "raw/round_level_results.csv"}) {
    std::set<std::string> kept;
    for (const auto& l : testutil::lines(testutil::slurp(a / f))) {
      const auto fl = testutil::fields(l);
      if (fl.size() > 2 && fl[2] != "1") kept.insert(l);
    }
    std::set<std::string> reduced;
    for (const auto& l : testutil::lines(testutil::slurp(b / f))) reduced.insert(l);
    CHECK(kept == reduced);
  }
}

TEST_CASE("config validation") {
  const fs::path out = testutil::fresh_dir("cfg");
  CHECK_THROWS_AS(parse_config(mini_json(out, "[0, 100]")), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seeds": []})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"unknown_key": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"methods": ["nope"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"settings": [{"preset": "rp_base", "overrides": {"asset_table": "/nonexistent/t.csv"}}]})"),
      DataError);
  CHECK(parse_seed_list("0:30").size() == 30);
  CHECK(parse_seed_list("3,5,8") == std::vector<std::int64_t>{3, 5, 8});
  CHECK_THROWS_AS(parse_seed_list("a,b"), ConfigError);

  const ExperimentConfig def = default_config(true);
  CHECK(def.settings.size() == 5);
  CHECK(def.methods.size() == 14);
  CHECK(def.seeds.size() == 30);
  CHECK_NOTHROW(def.validate());
  for (const auto& name : preset_names()) CHECK(make_preset(name)->setting_id == name);
  CHECK_THROWS_AS(make_preset("nope"), ConfigError);
}

TEST_CASE("order-preserving parallel map") {
  std::vector<int> seen;
  ordered_parallel<int>(50, 8, [](std::size_t i) { return static_cast<int>(i * i); },
                        [&](std::size_t i, int v) {
                          CHECK(v == static_cast<int>(i * i));
                          seen.push_back(static_cast<int>(i));
                        });
  REQUIRE(seen.size() == 50);
  for (int i = 0; i < 50; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
  CHECK_THROWS_WITH(ordered_parallel<int>(
                        20, 4,
                        [](std::size_t i) -> int {
                          if (i == 7) throw std::runtime_error("boom");
                          return 0;
                        },
                        [](std::size_t, int) {}),
                    "boom");
}

TEST_CASE("verification-fee sweep") {
  const fs::path out = testutil::fresh_dir("cver");
  ExperimentConfig cfg = parse_config(mini_json(out, "[0]", 1, R"(["always_verify", "price_only"])"));
  const SweepResult r = run_sweep(cfg, SweepAxis::CVer, {0.0, 0.05});
  REQUIRE(r.rows.size() == 4);
  const auto& free = r.rows[0];
  const auto& paid = r.rows[2];
  REQUIRE(free.method_id == "always_verify");
  REQUIRE(paid.method_id == "always_verify");
  CHECK(free.cum_reward_mean >= paid.cum_reward_mean);
  // Decisions ignore the fee, so the gap is exactly one fee per round.
  CHECK(free.cum_reward_mean - paid.cum_reward_mean == doctest::Approx(0.05 * 20).epsilon(1e-12));
  CHECK(r.rows[1].cum_reward_mean == r.rows[3].cum_reward_mean);
  CHECK_THROWS_AS(run_sweep(cfg, SweepAxis::CVer, {}), ConfigError);
}

TEST_CASE("coarse-noise sweep regenerates the streams") {
  const fs::path out = testutil::fresh_dir("sigma");
  ExperimentConfig cfg = parse_config(mini_json(out, "[0]", 1, R"(["price_only", "nhcrop"])"));
  const SweepResult r = run_sweep(cfg, SweepAxis::SigmaCoarse, {0.05, 0.2, 0.4});
  CHECK(r.rows.size() == 6);
  // axis_value,setting,method,seed,round,verify,action_kind,price,purchased,true_cost,coarse_cost,...
  std::map<std::string, std::map<std::string, std::string>> coarse;  // value -> (method,seed,round) -> coarse
  for (const auto& l : testutil::lines(testutil::slurp(out / "raw/sweep_sigma_coarse_rounds.csv"))) {
    const auto f = testutil::fields(l);
    if (f[0] == "axis_value") {
      CHECK(f[10] == "coarse_cost");
      continue;
    }
    coarse[f[0]][f[2] + "/" + f[3] + "/" + f[4]] = f[10];
  }
  REQUIRE(coarse.size() == 3);
  const auto& a = coarse["0.05"];
  const auto& b = coarse["0.2"];
  const auto& c = coarse["0.4"];
  CHECK(a.size() == 2 * 2 * 20);
  int differ_ab = 0, differ_bc = 0;
  for (const auto& [k, v] : a) {
    differ_ab += v != b.at(k);
    differ_bc += b.at(k) != c.at(k);
  }
  CHECK(differ_ab > 0);
  CHECK(differ_bc > 0);
}

TEST_CASE("clip sweep emits a winner row") {
  const fs::path out = testutil::fresh_dir("clip");
  ExperimentConfig cfg = parse_config(mini_json(out, "[0]", 1, R"(["price_only_clip", "nhcrop_clip"])"));
  const SweepResult r = run_sweep(cfg, SweepAxis::Clip, {0.1, 0.2, 0.3, 0.5, 0.8, 1.2});
  CHECK(r.rows.size() == 12);
  REQUIRE(r.selected_clip.has_value());
  const auto rows = testutil::lines(testutil::slurp(out / "tables/sweep_clip.csv"));
  REQUIRE(rows.size() == 1 + 12 + 1);
  CHECK(rows.back().rfind("all,clip,", 0) == 0);
  CHECK(rows.back().find("select_clip") != std::string::npos);
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = testutil::fresh_dir("cli");
  testutil::write_file(dir / "overlap.json", mini_json(dir / "o1", "[0, 100]"));
  CHECK(run_cli("run-audit --config " + (dir / "overlap.json").string()) == 2);

  testutil::write_file(dir / "missing.json", R"({"settings": [{"preset": "rp_base", "overrides": {"asset_table": "absent.csv"}}],
    "methods": ["price_only"], "seeds": [0], "validation_seeds": [9]})");
  CHECK(run_cli("run-audit --config " + (dir / "missing.json").string()) == 3);

  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("sweep --axis bogus --values 1 --config " + (dir / "overlap.json").string()) == 2);

  testutil::write_file(dir / "ok.json", mini_json(dir / "o2"));
  CHECK(run_cli("run-audit --config " + (dir / "ok.json").string()) == 0);
  CHECK(fs::exists(dir / "o2" / "tables" / "final_setting_method_summary.csv"));
  CHECK(run_cli("roi-audit --config " + (dir / "ok.json").string() + " --out " + (dir / "o3").string()) == 0);
  CHECK(fs::exists(dir / "o3" / "tables" / "verification_roi_summary.csv"));
}

TEST_CASE("gen-assets") {
  const fs::path dir = testutil::fresh_dir("gen");
  const fs::path slices = dir / "slices";
  write_slice_directory(slices.string(), synthesize_slices(12, 4, TextProxyConfig::defaults()));
  REQUIRE(run_cli("gen-assets --slices " + slices.string() + " --out " + (dir / "t.csv").string()) == 0);
  const AssetTable t = load_asset_table((dir / "t.csv").string());
  CHECK(t.rows.size() == 12);
  CHECK(t.n_task_kinds == 3);

  REQUIRE(run_cli("gen-assets --synthetic-utility --assets 720 --tasks 3 --correlation 0 --seed 2 --out " +
                  (dir / "u.csv").string()) == 0);
  const AssetTable u = load_asset_table((dir / "u.csv").string());
  CHECK(u.rows.size() == 720);
  CHECK(u.n_task_kinds == 3);
  REQUIRE(u.has_utilities());
  std::vector<double> util, cost;
  for (const auto& r : u.rows) {
    for (double x : r.utilities) {
      util.push_back(x);
      cost.push_back(r.true_cost);
    }
  }
  CHECK(std::fabs(pearson(util, cost)) <= 0.15);

  fs::create_directories(dir / "empty");
  CHECK(run_cli("gen-assets --slices " + (dir / "empty").string() + " --out " + (dir / "e.csv").string()) != 0);
  CHECK(run_cli("gen-assets --slices " + (dir / "absent").string() + " --out " + (dir / "e.csv").string()) != 0);
}
