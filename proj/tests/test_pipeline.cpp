#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/pipeline.hpp"
#include "hbmtherm/text_io.hpp"

using namespace hbmtherm;

namespace {

std::string source_path(const char* rel) {
  return std::string(HBMTHERM_SOURCE_DIR) + "/" + rel;
}

const PresetTable& presets() {
  static PresetTable table = PresetTable::load(source_path("data/tsv_presets.csv"));
  return table;
}

std::string fresh_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Small, fast configuration for end-to-end exercises.
RunConfig small_config(const std::string& out_dir) {
  RunConfig c;
  c.seed = 2024;
  c.out_dir = out_dir;
  c.preset_table = source_path("data/tsv_presets.csv");
  c.workers = 2;
  c.geometry.nx = 4;
  c.geometry.ny = 4;
  c.sample_count = 24;
  c.train.epochs = 40;
  c.train.epochs_t = 30;
  c.train.epochs_p = 30;
  c.train.batch_size = 64;
  c.train.history_every = 10;
  c.train.threads = 2;
  c.energy_cases = 3;
  c.fine_nx = 32;
  c.fine_ny = 32;
  c.finalize();
  return c;
}

}  // namespace

TEST_CASE("run configuration file") {
  SUBCASE("the annotated example parses to the documented defaults") {
    RunConfig c = RunConfig::from_file(source_path("configs/default.ini"));
    CHECK(c.seed == 42);
    CHECK(c.geometry.nx == 16);
    CHECK(c.sample_count == 2000);
    CHECK(c.train.batch_size == 2400);
    CHECK(c.arch == "1nn2out");
    CHECK(c.train.schedule.step_epochs == 5000);
    CHECK(c.dataset == "out/dataset.csv");
  }
  SUBCASE("unknown keys are rejected") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "hbm_bad.ini").string();
    write_file(path, "[run]\nseed = 1\nbogus_key = 3\n");
    CHECK_THROWS_WITH_AS(RunConfig::from_file(path), doctest::Contains("bogus_key"),
                         ConfigError);
  }
  SUBCASE("the seed is mandatory") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "hbm_noseed.ini").string();
    write_file(path, "[run]\nout_dir = /tmp/x\n");
    CHECK_THROWS_AS(RunConfig::from_file(path), ConfigError);
  }
  SUBCASE("hash tracks contents") {
    RunConfig a = small_config("/tmp/hbm_cfg_a");
    RunConfig b = a;
    CHECK(a.config_hash() == b.config_hash());
    b.train.w_p = 20;
    CHECK(a.config_hash() != b.config_hash());
    // Solver provenance ignores training settings.
    CHECK(a.solver_config_hash() == b.solver_config_hash());
    b.solver.rel_tolerance = 1e-6;
    CHECK(a.solver_config_hash() != b.solver_config_hash());
  }
}

TEST_CASE("solver validation suite passes at its configured tolerances") {
  RunConfig c = small_config(fresh_dir("hbm_validate"));
  const ValidationReport report = run_solver_validation(c, presets(), true);
  for (const auto& check : report.checks) {
    INFO(check.name, ": ", check.detail);
    CHECK(check.passed);
  }
  CHECK(report.all_passed());
  CHECK(std::filesystem::exists(c.out_dir + "/reference_grid.txt"));
  CHECK(std::filesystem::exists(c.out_dir + "/reference_residuals.csv"));

  SUBCASE("tightened tolerance exercises the failure path") {
    RunConfig strict = c;
    strict.solver.rel_tolerance = 1e-15;  // unreachable in finite iterations
    strict.solver.max_iterations = 40;
    const ValidationReport failing = run_solver_validation(strict, presets(), false);
    CHECK(!failing.all_passed());
  }
}

TEST_CASE("generate: smoke run, determinism, gates") {
  RunConfig c = small_config(fresh_dir("hbm_gen"));
  std::ostringstream log;
  const GenerateSummary summary = cmd_generate(c, presets(), log);
  CHECK(summary.raw_count == 24);
  CHECK(summary.kept_count + summary.excluded_count == 24);
  CHECK(std::filesystem::exists(c.dataset));
  CHECK(std::filesystem::exists(c.dataset + ".meta"));
  CHECK(std::filesystem::exists(c.out_dir + "/exclusions.csv"));
  const Dataset d = load_dataset(c.dataset);
  CHECK(d.rows.size() == summary.kept_count);
  CHECK(d.raw_count == 24);

  SUBCASE("same seed reproduces the files byte for byte") {
    const std::string csv = read_file(c.dataset);
    const std::string meta = read_file(c.dataset + ".meta");
    cmd_generate(c, presets(), log);
    CHECK(read_file(c.dataset) == csv);
    CHECK(read_file(c.dataset + ".meta") == meta);
  }
  SUBCASE("impossible threshold trips the exclusion gate with diagnostics") {
    RunConfig doomed = c;
    doomed.t_max_threshold_c = 1.0;
    CHECK_THROWS_WITH_AS(cmd_generate(doomed, presets(), log),
                         doctest::Contains("t_max_above_threshold"), CheckFailure);
  }
  SUBCASE("starved iteration budget excludes cases as non-converged") {
    RunConfig starved = c;
    starved.solver.max_iterations = 1;
    starved.max_exclusion_rate = 1.0;
    const GenerateSummary s = cmd_generate(starved, presets(), log);
    CHECK(s.kept_count == 0);
    const std::string exclusions = read_file(starved.out_dir + "/exclusions.csv");
    CHECK(exclusions.find("non-converged") != std::string::npos);
  }
}

TEST_CASE("train, eval and infer round trip") {
  RunConfig c = small_config(fresh_dir("hbm_e2e"));
  std::ostringstream log;
  cmd_generate(c, presets(), log);
  cmd_train(c, log);
  CHECK(std::filesystem::exists(c.checkpoint));
  CHECK(std::filesystem::exists(c.checkpoint + ".history.csv"));

  // The checkpoint carries the dataset's normalization block verbatim.
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  const Dataset d = load_dataset(c.dataset);
  CHECK(ckpt.norm.canonical_text() == d.norm.canonical_text());

  const EvalSummary summary = cmd_eval(c, presets(), log);
  CHECK(summary.report.t_overall.count > 0);
  for (const char* name : {"/metrics.csv", "/summary.txt", "/scatter.csv",
                           "/error_hist.csv", "/family_table.csv"})
    CHECK(std::filesystem::exists(c.report_dir + std::string(name)));

  SUBCASE("inference flags off-level cases") {
    SampleCase probe = decode_features(d.rows[0].raw, presets());
    InferResult r = cmd_infer(c, presets(), probe);
    CHECK(!r.off_level);
    CHECK(r.prediction.hotspot_layer >= 0);
    probe.htc_top = 1000;  // not a trained level
    probe.case_id = compute_case_id(probe);
    r = cmd_infer(c, presets(), probe);
    CHECK(r.off_level);
  }
  SUBCASE("normalization mismatch between artifacts is rejected") {
    RunConfig other = c;
    other.temperature_divisor = 123;
    std::filesystem::remove(c.dataset);
    std::filesystem::remove(c.dataset + ".meta");
    cmd_generate(other, presets(), log);  // dataset now normalized differently
    CHECK_THROWS_AS(cmd_eval(other, presets(), log), CheckFailure);
  }
}

TEST_CASE("2nn2out trains and infers through the same pipeline") {
  RunConfig c = small_config(fresh_dir("hbm_2nn"));
  c.arch = "2nn2out";
  std::ostringstream log;
  cmd_generate(c, presets(), log);
  cmd_train(c, log);
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  REQUIRE(ckpt.nets.size() == 2);
  CHECK(ckpt.nets[0].spec.arch == Arch::TempNet);
  CHECK(ckpt.nets[1].spec.arch == Arch::PosNet);
  const EvalSummary summary = cmd_eval(c, presets(), log);
  CHECK(summary.report.p_overall.count > 0);
}

TEST_CASE("level membership") {
  ParameterSpace space;
  SamplePlan plan;
  plan.seed = 3;
  plan.counts = {{4, 3}};
  for (const auto& c : lhs_sample(space, plan)) CHECK(case_on_levels(space, c));
  SampleCase off = lhs_sample(space, plan)[0];
  off.htc_bottom = 777;
  CHECK(!case_on_levels(space, off));
}
