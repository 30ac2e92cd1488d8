#include "hbmtherm/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/text_io.hpp"

namespace hbmtherm {

namespace {

// Raw "[section] key = value" store with consumption tracking so leftover
// (unknown) keys can be rejected after all expected keys were read.
class IniFile {
 public:
  static IniFile parse(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    IniFile ini;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const size_t comment = line.find_first_of("#;");
      if (comment != std::string::npos) line = line.substr(0, comment);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(path + ":" + std::to_string(line_no) +
                                   ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(line_no) +
                                 ": expected key = value");
      const std::string key = section + "." + trim(line.substr(0, eq));
      if (ini.values_.count(key))
        throw ConfigError(path + ":" + std::to_string(line_no) +
                                 ": duplicate key " + key);
      ini.values_[key] = trim(line.substr(eq + 1));
    }
    ini.path_ = path;
    return ini;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_double(it->second);
    } catch (const std::exception&) {
      throw ConfigError(path_ + ": key " + key + ": expected a number, got '" +
                               it->second + "'");
    }
  }

  long long get_int(const std::string& key, long long fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_int(it->second);
    } catch (const std::exception&) {
      throw ConfigError(path_ + ": key " + key + ": expected an integer, got '" +
                               it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError(path_ + ": key " + key + ": expected true/false");
  }

  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    for (const auto& tok : split_csv(it->second)) out.push_back(int(parse_int(trim(tok))));
    return out;
  }

  void reject_unconsumed() const {
    std::string unknown;
    for (const auto& [key, value] : values_)
      if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    if (!unknown.empty())
      throw ConfigError(path_ + ": unknown configuration keys: " + unknown);
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  std::string path_;
};

}  // namespace

NormalizationSpec RunConfig::normalization() const {
  NormalizationSpec n = default_normalization();
  n.feature_scale[0] = 1.0 / layers_divisor;
  for (int i = 1; i <= 8; ++i) n.feature_scale[i] = 1.0 / thickness_divisor;
  for (int i = 9; i <= 16; ++i) n.feature_scale[i] = 1.0 / preset_divisor;
  for (int i = 17; i <= 25; ++i) n.feature_scale[i] = 1.0 / power_divisor;
  n.feature_scale[26] = 1.0 / htc_divisor;
  n.feature_scale[27] = 1.0 / htc_divisor;
  n.t_scale = 1.0 / temperature_divisor;
  n.z_scale = 1.0 / position_divisor;
  return n;
}

std::string RunConfig::canonical_dump() const {
  std::string s;
  auto kv = [&](const std::string& key, const std::string& value) {
    s += key + " = " + value + "\n";
  };
  kv("run.seed", std::to_string(seed));
  kv("run.out_dir", out_dir);
  kv("paths.preset_table", preset_table);
  kv("paths.dataset", dataset);
  kv("paths.checkpoint", checkpoint);
  kv("paths.report_dir", report_dir);
  kv("geometry.footprint_x_um", format_double(geometry.footprint_x_um));
  kv("geometry.footprint_y_um", format_double(geometry.footprint_y_um));
  kv("geometry.substrate_thickness_um", format_double(geometry.substrate_thickness_um));
  kv("geometry.substrate_k", format_double(geometry.substrate_k));
  kv("geometry.bond_thickness_um", format_double(geometry.bond_thickness_um));
  kv("geometry.bond_k_inplane", format_double(geometry.bond_k.k_xy));
  kv("geometry.bond_k_vertical", format_double(geometry.bond_k.k_z));
  kv("geometry.chip_budget_um", format_double(geometry.chip_budget_um));
  kv("geometry.ambient_c", format_double(geometry.ambient_c));
  kv("geometry.source_face",
     geometry.source_face == GeometryConfig::SourceFace::Bottom ? "bottom" : "top");
  kv("geometry.nx", std::to_string(geometry.nx));
  kv("geometry.ny", std::to_string(geometry.ny));
  kv("geometry.chip_cell_um", format_double(geometry.chip_cell_um));
  kv("geometry.substrate_cells", std::to_string(geometry.substrate_cells));
  kv("geometry.bond_cells", std::to_string(geometry.bond_cells));
  kv("materials.k_si", format_double(materials.k_si));
  kv("materials.k_cu", format_double(materials.k_cu));
  kv("materials.k_tsv", format_double(materials.k_tsv));
  kv("solver.rel_tolerance", format_double(solver.rel_tolerance));
  kv("solver.max_iterations", std::to_string(solver.max_iterations));
  kv("solver.preconditioner",
     solver.preconditioner == SolverConfig::Preconditioner::Diagonal ? "diagonal" : "none");
  kv("solver.t_max_threshold_c", format_double(t_max_threshold_c));
  kv("sampling.count", std::to_string(sample_count));
  {
    std::string fams;
    for (size_t i = 0; i < families.size(); ++i)
      fams += (i ? "," : "") + std::to_string(families[i]);
    kv("sampling.families", fams);
  }
  kv("sampling.dedupe", dedupe ? "true" : "false");
  kv("sampling.max_exclusion_rate", format_double(max_exclusion_rate));
  kv("normalization.layers_divisor", format_double(layers_divisor));
  kv("normalization.thickness_divisor", format_double(thickness_divisor));
  kv("normalization.preset_divisor", format_double(preset_divisor));
  kv("normalization.power_divisor", format_double(power_divisor));
  kv("normalization.htc_divisor", format_double(htc_divisor));
  kv("normalization.temperature_divisor", format_double(temperature_divisor));
  kv("normalization.position_divisor", format_double(position_divisor));
  kv("model.arch", arch);
  kv("model.dropout_p", format_double(dropout_p));
  kv("model.p_output_scale", format_double(p_output_scale));
  kv("train.lr", format_double(train.schedule.lr0));
  kv("train.lr_schedule",
     train.schedule.kind == LrSchedule::Kind::Step ? "step" : "constant");
  kv("train.lr_gamma", format_double(train.schedule.gamma));
  kv("train.lr_step_epochs", std::to_string(train.schedule.step_epochs));
  kv("train.batch_size", std::to_string(train.batch_size));
  kv("train.batch_size_two_net", std::to_string(train.batch_size_two_net));
  kv("train.epochs", std::to_string(train.epochs));
  kv("train.epochs_t", std::to_string(train.epochs_t));
  kv("train.epochs_p", std::to_string(train.epochs_p));
  kv("train.w_p", format_double(train.w_p));
  kv("train.history_every", std::to_string(train.history_every));
  kv("eval.batch_sweep", run_batch_sweep ? "true" : "false");
  {
    std::string sizes;
    for (size_t i = 0; i < batch_sweep_sizes.size(); ++i)
      sizes += (i ? "," : "") + std::to_string(batch_sweep_sizes[i]);
    kv("eval.batch_sweep_sizes", sizes);
  }
  kv("eval.sweep_epochs", std::to_string(sweep_epochs));
  kv("eval.partial_study", run_partial_study ? "true" : "false");
  kv("eval.partial_rows", std::to_string(partial_rows));
  kv("eval.generalization", run_generalization ? "true" : "false");
  kv("eval.generalization_htc", format_double(generalization_htc));
  kv("eval.generalization_cases", std::to_string(generalization_cases));
  kv("validation.analytic_max_rel_error", format_double(analytic_max_rel_error));
  kv("validation.oracle_max_rel_error", format_double(oracle_max_rel_error));
  kv("validation.energy_max_rel_error", format_double(energy_max_rel_error));
  kv("validation.energy_cases", std::to_string(energy_cases));
  kv("validation.fidelity_max_dt_rel", format_double(fidelity_max_dt_rel));
  kv("validation.fidelity_min_cell_ratio", format_double(fidelity_min_cell_ratio));
  kv("validation.fine_nx", std::to_string(fine_nx));
  kv("validation.fine_ny", std::to_string(fine_ny));
  return s;
}

uint64_t RunConfig::config_hash() const { return fnv1a(canonical_dump()); }

uint64_t RunConfig::solver_config_hash() const {
  // Provenance of the simulated labels: geometry + materials + solver knobs.
  std::string dump = canonical_dump();
  std::string relevant;
  std::istringstream in(dump);
  std::string line;
  while (std::getline(in, line))
    if (starts_with(line, "geometry.") || starts_with(line, "materials.") ||
        starts_with(line, "solver."))
      relevant += line + "\n";
  return fnv1a(relevant);
}

void RunConfig::finalize() {
  if (dataset.empty()) dataset = out_dir + "/dataset.csv";
  if (checkpoint.empty()) checkpoint = out_dir + "/checkpoint.txt";
  if (report_dir.empty()) report_dir = out_dir + "/report";
  if (!std::filesystem::exists(preset_table))
    throw ConfigError("config: preset table not found: " + preset_table);
  if (arch != "1nn2out" && arch != "1nn2out_baseline" && arch != "2nn2out")
    throw ConfigError("config: unknown model.arch '" + arch + "'");
  if (!(solver.rel_tolerance > 0 && solver.rel_tolerance < 1))
    throw ConfigError("config: solver.rel_tolerance must be in (0, 1)");
  for (double d : {layers_divisor, thickness_divisor, preset_divisor, power_divisor,
                   htc_divisor, temperature_divisor, position_divisor})
    if (d == 0) throw ConfigError("config: normalization divisors must be nonzero");
}

RunConfig RunConfig::from_file(const std::string& path) {
  IniFile ini = IniFile::parse(path);
  RunConfig c;

  if (!ini.has("run.seed"))
    throw ConfigError(path + ": run.seed is required");
  c.seed = uint64_t(ini.get_int("run.seed", 0));
  c.out_dir = ini.get_string("run.out_dir", c.out_dir);
  c.workers = int(ini.get_int("run.workers", c.workers));

  c.preset_table = ini.get_string("paths.preset_table", c.preset_table);
  c.dataset = ini.get_string("paths.dataset", "");
  c.checkpoint = ini.get_string("paths.checkpoint", "");
  c.report_dir = ini.get_string("paths.report_dir", "");

  GeometryConfig& g = c.geometry;
  g.footprint_x_um = ini.get_double("geometry.footprint_x_um", g.footprint_x_um);
  g.footprint_y_um = ini.get_double("geometry.footprint_y_um", g.footprint_y_um);
  g.substrate_thickness_um =
      ini.get_double("geometry.substrate_thickness_um", g.substrate_thickness_um);
  g.substrate_k = ini.get_double("geometry.substrate_k", g.substrate_k);
  g.bond_thickness_um = ini.get_double("geometry.bond_thickness_um", g.bond_thickness_um);
  g.bond_k.k_xy = ini.get_double("geometry.bond_k_inplane", g.bond_k.k_xy);
  g.bond_k.k_z = ini.get_double("geometry.bond_k_vertical", g.bond_k.k_z);
  g.chip_budget_um = ini.get_double("geometry.chip_budget_um", g.chip_budget_um);
  g.ambient_c = ini.get_double("geometry.ambient_c", g.ambient_c);
  const std::string face = ini.get_string("geometry.source_face", "bottom");
  if (face == "bottom") g.source_face = GeometryConfig::SourceFace::Bottom;
  else if (face == "top") g.source_face = GeometryConfig::SourceFace::Top;
  else throw ConfigError(path + ": geometry.source_face must be bottom or top");
  g.nx = int(ini.get_int("geometry.nx", g.nx));
  g.ny = int(ini.get_int("geometry.ny", g.ny));
  g.chip_cell_um = ini.get_double("geometry.chip_cell_um", g.chip_cell_um);
  g.substrate_cells = int(ini.get_int("geometry.substrate_cells", g.substrate_cells));
  g.bond_cells = int(ini.get_int("geometry.bond_cells", g.bond_cells));

  c.materials.k_si = ini.get_double("materials.k_si", c.materials.k_si);
  c.materials.k_cu = ini.get_double("materials.k_cu", c.materials.k_cu);
  c.materials.k_tsv = ini.get_double("materials.k_tsv", c.materials.k_tsv);

  c.solver.rel_tolerance = ini.get_double("solver.rel_tolerance", c.solver.rel_tolerance);
  c.solver.max_iterations = int(ini.get_int("solver.max_iterations", 0));
  const std::string precond = ini.get_string("solver.preconditioner", "diagonal");
  if (precond == "diagonal")
    c.solver.preconditioner = SolverConfig::Preconditioner::Diagonal;
  else if (precond == "none")
    c.solver.preconditioner = SolverConfig::Preconditioner::None;
  else throw ConfigError(path + ": solver.preconditioner must be diagonal or none");
  c.t_max_threshold_c = ini.get_double("solver.t_max_threshold_c", c.t_max_threshold_c);

  c.sample_count = size_t(ini.get_int("sampling.count", int(c.sample_count)));
  c.families = ini.get_int_list("sampling.families", c.families);
  c.dedupe = ini.get_bool("sampling.dedupe", c.dedupe);
  c.max_exclusion_rate = ini.get_double("sampling.max_exclusion_rate", c.max_exclusion_rate);

  c.layers_divisor = ini.get_double("normalization.layers_divisor", c.layers_divisor);
  c.thickness_divisor = ini.get_double("normalization.thickness_divisor", c.thickness_divisor);
  c.preset_divisor = ini.get_double("normalization.preset_divisor", c.preset_divisor);
  c.power_divisor = ini.get_double("normalization.power_divisor", c.power_divisor);
  c.htc_divisor = ini.get_double("normalization.htc_divisor", c.htc_divisor);
  c.temperature_divisor =
      ini.get_double("normalization.temperature_divisor", c.temperature_divisor);
  c.position_divisor = ini.get_double("normalization.position_divisor", c.position_divisor);

  c.arch = ini.get_string("model.arch", c.arch);
  c.dropout_p = ini.get_double("model.dropout_p", c.dropout_p);
  c.p_output_scale = ini.get_double("model.p_output_scale", c.p_output_scale);

  TrainConfig& t = c.train;
  t.schedule.lr0 = ini.get_double("train.lr", t.schedule.lr0);
  const std::string sched = ini.get_string("train.lr_schedule", "step");
  if (sched == "step") t.schedule.kind = LrSchedule::Kind::Step;
  else if (sched == "constant") t.schedule.kind = LrSchedule::Kind::Constant;
  else throw ConfigError(path + ": train.lr_schedule must be step or constant");
  t.schedule.gamma = ini.get_double("train.lr_gamma", t.schedule.gamma);
  t.schedule.step_epochs = int(ini.get_int("train.lr_step_epochs", t.schedule.step_epochs));
  t.batch_size = int(ini.get_int("train.batch_size", t.batch_size));
  t.batch_size_two_net = int(ini.get_int("train.batch_size_two_net", t.batch_size_two_net));
  t.epochs = int(ini.get_int("train.epochs", t.epochs));
  t.epochs_t = int(ini.get_int("train.epochs_t", t.epochs_t));
  t.epochs_p = int(ini.get_int("train.epochs_p", t.epochs_p));
  t.w_p = ini.get_double("train.w_p", t.w_p);
  t.history_every = int(ini.get_int("train.history_every", t.history_every));
  t.threads = int(ini.get_int("train.threads", t.threads));
  t.dropout_p = c.dropout_p;
  t.p_output_scale = c.p_output_scale;

  c.run_batch_sweep = ini.get_bool("eval.batch_sweep", c.run_batch_sweep);
  c.batch_sweep_sizes = ini.get_int_list("eval.batch_sweep_sizes", c.batch_sweep_sizes);
  c.sweep_epochs = int(ini.get_int("eval.sweep_epochs", c.sweep_epochs));
  c.run_partial_study = ini.get_bool("eval.partial_study", c.run_partial_study);
  c.partial_rows = size_t(ini.get_int("eval.partial_rows", int(c.partial_rows)));
  c.run_generalization = ini.get_bool("eval.generalization", c.run_generalization);
  c.generalization_htc = ini.get_double("eval.generalization_htc", c.generalization_htc);
  c.generalization_cases =
      int(ini.get_int("eval.generalization_cases", c.generalization_cases));

  c.analytic_max_rel_error =
      ini.get_double("validation.analytic_max_rel_error", c.analytic_max_rel_error);
  c.oracle_max_rel_error =
      ini.get_double("validation.oracle_max_rel_error", c.oracle_max_rel_error);
  c.energy_max_rel_error =
      ini.get_double("validation.energy_max_rel_error", c.energy_max_rel_error);
  c.energy_cases = int(ini.get_int("validation.energy_cases", c.energy_cases));
  c.fidelity_max_dt_rel =
      ini.get_double("validation.fidelity_max_dt_rel", c.fidelity_max_dt_rel);
  c.fidelity_min_cell_ratio =
      ini.get_double("validation.fidelity_min_cell_ratio", c.fidelity_min_cell_ratio);
  c.fine_nx = int(ini.get_int("validation.fine_nx", c.fine_nx));
  c.fine_ny = int(ini.get_int("validation.fine_ny", c.fine_ny));

  ini.reject_unconsumed();
  c.finalize();
  return c;
}

}  // namespace hbmtherm
