// hbmtherm command-line pipeline: homogenize, validate-solver, generate,
// train, eval, infer. Exit codes: 0 success, 1 validation/check failure,
// 2 usage error, 3 runtime error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/pipeline.hpp"
#include "hbmtherm/text_io.hpp"

using namespace hbmtherm;

namespace {

struct CommonFlags {
  std::string config_path;
  long long seed = -1;
  std::string out;
  int workers = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path, "run configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "override run.seed");
  cmd->add_option("--out", flags.out, "override run.out_dir");
  cmd->add_option("--workers", flags.workers, "override run.workers");
}

RunConfig load_config(const CommonFlags& flags) {
  RunConfig config = RunConfig::from_file(flags.config_path);
  if (flags.seed >= 0) config.seed = uint64_t(flags.seed);
  if (!flags.out.empty()) {
    config.out_dir = flags.out;
    config.dataset = config.out_dir + "/dataset.csv";
    config.checkpoint = config.out_dir + "/checkpoint.txt";
    config.report_dir = config.out_dir + "/report";
  }
  if (flags.workers >= 0) config.workers = flags.workers;
  return config;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  for (const auto& tok : split_csv(csv)) out.push_back(parse_double(trim(tok)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermal dataset generation and neural surrogate pipeline for "
               "stacked-memory chiplets"};
  app.require_subcommand(1);

  // homogenize
  auto* homog = app.add_subcommand(
      "homogenize", "print fill fraction and equivalent conductivity pair");
  std::string preset_name, preset_path = "data/tsv_presets.csv";
  TsvLayout layout;
  MaterialSet mats;
  homog->add_option("--preset", preset_name, "preset name (canonical pair)");
  homog->add_option("--preset-table", preset_path, "preset table path");
  homog->add_option("--count", layout.count, "pillar count");
  homog->add_option("--radius-um", layout.radius_um, "pillar radius, um");
  homog->add_option("--width-um", layout.die_width_um, "die width, um")
      ->default_val(10000.0);
  homog->add_option("--depth-um", layout.die_depth_um, "die depth, um")
      ->default_val(10000.0);
  homog->add_option("--k-si", mats.k_si, "silicon conductivity, W/m-K");
  homog->add_option("--k-cu", mats.k_cu, "copper conductivity, W/m-K");
  homog->add_option("--k-tsv", mats.k_tsv, "pillar vertical conductivity, W/m-K");

  // validate-solver
  auto* validate_cmd =
      app.add_subcommand("validate-solver", "run the solver validation checks");
  CommonFlags validate_flags;
  add_common(validate_cmd, validate_flags, true);

  // generate
  auto* generate_cmd =
      app.add_subcommand("generate", "sample cases, solve them, write the dataset");
  CommonFlags generate_flags;
  long long generate_count = -1;
  add_common(generate_cmd, generate_flags, true);
  generate_cmd->add_option("--count", generate_count, "override sampling.count");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the surrogate on a dataset");
  CommonFlags train_flags;
  std::string train_arch;
  add_common(train_cmd, train_flags, true);
  train_cmd->add_option("--arch", train_arch,
                        "override model.arch (1nn2out | 1nn2out_baseline | 2nn2out)");

  // eval
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint and export reports");
  CommonFlags eval_flags;
  add_common(eval_cmd, eval_flags, true);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "predict one case from a checkpoint");
  CommonFlags infer_flags;
  add_common(infer_cmd, infer_flags, true);
  int infer_family = 0;
  std::string infer_thicknesses, infer_presets, infer_powers;
  double infer_htc_top = 0, infer_htc_bottom = 0;
  infer_cmd->add_option("--family", infer_family, "layer count (1, 2, 4, 8)")->required();
  infer_cmd
      ->add_option("--thicknesses", infer_thicknesses,
                   "logic + chip thicknesses, um (family values)")
      ->required();
  infer_cmd
      ->add_option("--presets", infer_presets, "logic + chip presets (family names)")
      ->required();
  infer_cmd
      ->add_option("--powers", infer_powers, "logic + chip powers, W (family+1 values)")
      ->required();
  infer_cmd->add_option("--htc-top", infer_htc_top, "top coefficient, W/m^2-K")->required();
  infer_cmd->add_option("--htc-bottom", infer_htc_bottom, "bottom coefficient, W/m^2-K")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (homog->parsed()) {
      if (!preset_name.empty()) {
        const PresetTable table = PresetTable::load(preset_path);
        const TsvPreset& p = table.by_name(preset_name);
        std::cout << "preset = " << p.name << "\n"
                  << "rho = " << format_double(p.fill_fraction) << "\n"
                  << "k_xy = " << format_double(p.k.k_xy) << " W/m-K\n"
                  << "k_z = " << format_double(p.k.k_z) << " W/m-K\n";
      } else {
        const double rho = areal_density(layout);
        const AnisotropicConductivity k = homogenize(layout, mats);
        std::cout << "rho = " << format_double(rho) << "\n"
                  << "k_xy = " << format_double(k.k_xy) << " W/m-K\n"
                  << "k_z = " << format_double(k.k_z) << " W/m-K\n";
      }
      return 0;
    }

    if (validate_cmd->parsed()) {
      const RunConfig config = load_config(validate_flags);
      const PresetTable presets = PresetTable::load(config.preset_table);
      const ValidationReport report =
          run_solver_validation(config, presets, /*write_artifacts=*/true);
      for (const auto& check : report.checks)
        std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name << ": "
                  << check.detail << "\n";
      return report.all_passed() ? 0 : 1;
    }

    if (generate_cmd->parsed()) {
      RunConfig config = load_config(generate_flags);
      if (generate_count >= 0) config.sample_count = size_t(generate_count);
      const PresetTable presets = PresetTable::load(config.preset_table);
      cmd_generate(config, presets, std::cout);
      return 0;
    }

    if (train_cmd->parsed()) {
      RunConfig config = load_config(train_flags);
      if (!train_arch.empty()) {
        config.arch = train_arch;
        config.finalize();
      }
      cmd_train(config, std::cout);
      return 0;
    }

    if (eval_cmd->parsed()) {
      const RunConfig config = load_config(eval_flags);
      const PresetTable presets = PresetTable::load(config.preset_table);
      cmd_eval(config, presets, std::cout);
      return 0;
    }

    if (infer_cmd->parsed()) {
      const RunConfig config = load_config(infer_flags);
      const PresetTable presets = PresetTable::load(config.preset_table);
      SampleCase c;
      c.family = infer_family;
      c.thicknesses_um = parse_doubles(infer_thicknesses);
      for (const auto& tok : split_csv(infer_presets)) c.presets.push_back(trim(tok));
      c.powers_w = parse_doubles(infer_powers);
      c.htc_top = infer_htc_top;
      c.htc_bottom = infer_htc_bottom;
      c.case_id = compute_case_id(c);
      const InferResult result = cmd_infer(config, presets, c);
      std::cout << "t_max = " << format_double(result.prediction.t_c) << " C\n"
                << "hotspot_z = " << format_double(result.prediction.hotspot_z_um)
                << " um\n"
                << "hotspot_layer = " << result.prediction.hotspot_layer
                << (result.prediction.hotspot_layer == 0 ? " (substrate zone)" : "")
                << "\n"
                << "latency = " << format_double(result.latency_s * 1e3) << " ms\n";
      if (result.off_level)
        std::cout << "note: case is off the trained levels "
                     "(interpolation/extrapolation)\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CheckFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
