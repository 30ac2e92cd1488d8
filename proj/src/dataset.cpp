#include "hbmtherm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hbmtherm/rng.hpp"
#include "hbmtherm/text_io.hpp"

namespace hbmtherm {

namespace {

constexpr int kThicknessBase = 1;
constexpr int kPresetBase = 9;
constexpr int kPowerBase = 17;
constexpr int kHtcTop = 26;
constexpr int kHtcBottom = 27;

const char* kCsvHeader =
    "case_id,layer_count,"
    "t_logic_um,t_chip1_um,t_chip2_um,t_chip3_um,t_chip4_um,t_chip5_um,t_chip6_um,t_chip7_um,"
    "k_logic,k_chip1,k_chip2,k_chip3,k_chip4,k_chip5,k_chip6,k_chip7,"
    "p_logic_w,p_chip1_w,p_chip2_w,p_chip3_w,p_chip4_w,p_chip5_w,p_chip6_w,p_chip7_w,p_chip8_w,"
    "htc_top,htc_bottom,t_max_c,hotspot_z_um,split";

std::string join_doubles(const double* v, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace

std::string NormalizationSpec::canonical_text() const {
  std::string s = "normalization v" + std::to_string(version) + "\n";
  s += "feature_scale = " + join_doubles(feature_scale.data(), kFeatureWidth) + "\n";
  s += "feature_offset = " + join_doubles(feature_offset.data(), kFeatureWidth) + "\n";
  s += "label_t = " + format_double(t_scale) + "," + format_double(t_offset) + "\n";
  s += "label_z = " + format_double(z_scale) + "," + format_double(z_offset) + "\n";
  s += "end normalization\n";
  return s;
}

NormalizationSpec NormalizationSpec::from_canonical_text(const std::string& block) {
  std::istringstream in(block);
  std::string line;
  NormalizationSpec n;
  auto expect_prefix = [&](const std::string& prefix) -> std::string {
    if (!std::getline(in, line) || !starts_with(line, prefix))
      throw std::runtime_error("normalization block: expected '" + prefix + "'");
    return trim(line.substr(prefix.size()));
  };
  if (!std::getline(in, line) || !starts_with(line, "normalization v"))
    throw std::runtime_error("normalization block: missing version line");
  n.version = int(parse_int(trim(line.substr(15))));
  auto parse_array = [&](const std::string& text, FeatureVector& dst) {
    auto f = split_csv(text);
    if (int(f.size()) != kFeatureWidth)
      throw std::runtime_error("normalization block: expected 28 values");
    for (int i = 0; i < kFeatureWidth; ++i) dst[i] = parse_double(trim(f[i]));
  };
  parse_array(expect_prefix("feature_scale = "), n.feature_scale);
  parse_array(expect_prefix("feature_offset = "), n.feature_offset);
  auto parse_pair = [&](const std::string& text, double& s, double& o) {
    auto f = split_csv(text);
    if (f.size() != 2) throw std::runtime_error("normalization block: expected 2 values");
    s = parse_double(trim(f[0]));
    o = parse_double(trim(f[1]));
  };
  parse_pair(expect_prefix("label_t = "), n.t_scale, n.t_offset);
  parse_pair(expect_prefix("label_z = "), n.z_scale, n.z_offset);
  expect_prefix("end normalization");
  for (int i = 0; i < kFeatureWidth; ++i)
    if (n.feature_scale[i] == 0)
      throw std::runtime_error("normalization block: zero scale is not invertible");
  if (n.t_scale == 0 || n.z_scale == 0)
    throw std::runtime_error("normalization block: zero scale is not invertible");
  return n;
}

NormalizationSpec default_normalization() {
  NormalizationSpec n;
  n.feature_offset.fill(0.0);
  n.feature_scale[0] = 1.0 / 10.0;
  for (int i = kThicknessBase; i < kPresetBase; ++i) n.feature_scale[i] = 1.0 / 100.0;
  for (int i = kPresetBase; i < kPowerBase; ++i) n.feature_scale[i] = 1.0 / 2.0;
  for (int i = kPowerBase; i < kHtcTop; ++i) n.feature_scale[i] = 1.0 / 10.0;
  n.feature_scale[kHtcTop] = 1.0 / 10000.0;
  n.feature_scale[kHtcBottom] = 1.0 / 10000.0;
  n.t_scale = 1.0 / 200.0;
  n.t_offset = 0;
  n.z_scale = 1.0 / 1000.0;
  n.z_offset = 0;
  return n;
}

FeatureVector encode_features(const SampleCase& c, const PresetTable& presets) {
  if (int(c.thicknesses_um.size()) != c.family ||
      int(c.presets.size()) != c.family ||
      int(c.powers_w.size()) != c.family + 1)
    throw std::invalid_argument("encode: sequence lengths do not match family");
  FeatureVector raw;
  raw.fill(kPaddingValue);
  raw[0] = double(c.family);
  for (int i = 0; i < c.family; ++i) raw[kThicknessBase + i] = c.thicknesses_um[i];
  for (int i = 0; i < c.family; ++i)
    raw[kPresetBase + i] = double(presets.by_name(c.presets[i]).code);
  for (int i = 0; i <= c.family; ++i) raw[kPowerBase + i] = c.powers_w[i];
  raw[kHtcTop] = c.htc_top;
  raw[kHtcBottom] = c.htc_bottom;
  return raw;
}

SampleCase decode_features(const FeatureVector& raw, const PresetTable& presets) {
  SampleCase c;
  c.family = int(std::lround(raw[0]));
  if (c.family < 1 || c.family > 8)
    throw std::invalid_argument("decode: layer count out of range");
  for (int i = 0; i < c.family; ++i) c.thicknesses_um.push_back(raw[kThicknessBase + i]);
  for (int i = 0; i < c.family; ++i) {
    int code = int(std::lround(raw[kPresetBase + i]));
    c.presets.push_back(presets.by_code(code).name);
  }
  for (int i = 0; i <= c.family; ++i) c.powers_w.push_back(raw[kPowerBase + i]);
  c.htc_top = raw[kHtcTop];
  c.htc_bottom = raw[kHtcBottom];
  c.case_id = compute_case_id(c);
  return c;
}

FeatureVector normalize_features(const FeatureVector& raw, const NormalizationSpec& n) {
  FeatureVector out;
  for (int i = 0; i < kFeatureWidth; ++i)
    out[i] = raw[i] * n.feature_scale[i] + n.feature_offset[i];
  return out;
}

FeatureVector denormalize_features(const FeatureVector& norm, const NormalizationSpec& n) {
  FeatureVector out;
  for (int i = 0; i < kFeatureWidth; ++i)
    out[i] = (norm[i] - n.feature_offset[i]) / n.feature_scale[i];
  return out;
}

void shuffle_split(Dataset& dataset, uint64_t seed) {
  const size_t n = dataset.rows.size();
  if (n < 10) throw std::invalid_argument("shuffle_split: need at least 10 rows");
  const size_t test_total = size_t(std::llround(0.2 * double(n)));

  // Group rows by family, preserving order within each group.
  std::map<int, std::vector<size_t>> by_family;
  for (size_t i = 0; i < n; ++i)
    by_family[int(std::lround(dataset.rows[i].raw[0]))].push_back(i);

  // Largest-remainder allocation of the test budget across families.
  std::vector<std::pair<double, int>> remainders;
  std::map<int, size_t> test_counts;
  size_t assigned = 0;
  for (const auto& [family, rows] : by_family) {
    const double share = double(test_total) * double(rows.size()) / double(n);
    test_counts[family] = size_t(share);
    assigned += size_t(share);
    remainders.push_back({-(share - double(size_t(share))), family});
  }
  std::sort(remainders.begin(), remainders.end());
  for (size_t i = 0; assigned < test_total; ++i) {
    test_counts[remainders[i % remainders.size()].second] += 1;
    ++assigned;
  }

  for (auto& [family, rows] : by_family) {
    Rng rng(Rng::derive(seed, {0x53504c49ull /*SPLI*/, uint64_t(family)}));
    rng.shuffle(rows);
    const size_t tn = std::min(test_counts[family], rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
      dataset.rows[rows[i]].split = (i + tn >= rows.size()) ? 1 : 0;
  }

  // Randomize the stored row order.
  Rng order_rng(Rng::derive(seed, {0x4f524452ull /*ORDR*/}));
  order_rng.shuffle(dataset.rows);
}

void persist(const Dataset& dataset, const std::string& path) {
  std::string csv = std::string(kCsvHeader) + "\n";
  for (const auto& row : dataset.rows) {
    csv += row.case_id;
    for (int i = 0; i < kFeatureWidth; ++i) csv += "," + format_double(row.raw[i]);
    csv += "," + format_double(row.t_max_c);
    csv += "," + format_double(row.hotspot_z_um);
    csv += row.split == 1 ? ",test" : ",train";
    csv += "\n";
  }
  write_file(path, csv);

  std::string meta = "hbmtherm-dataset-meta v1\n";
  meta += "config_hash = " + to_hex(dataset.config_hash) + "\n";
  meta += "plan_seed = " + std::to_string(dataset.plan_seed) + "\n";
  meta += "solver_config_hash = " + to_hex(dataset.solver_config_hash) + "\n";
  meta += "raw_count = " + std::to_string(dataset.raw_count) + "\n";
  meta += "kept_count = " + std::to_string(dataset.rows.size()) + "\n";
  meta += "excluded_count = " + std::to_string(dataset.excluded_count) + "\n";
  // Published scaling-factor table, recorded for traceability; the applied
  // transforms are the normalization block below.
  meta += "published_scaling_factors = layers:100,thickness:4000,power:100,"
          "htc:0.3,temperature:2,position:1000\n";
  meta += dataset.norm.canonical_text();
  write_file(path + ".meta", meta);
}

Dataset load_dataset(const std::string& path) {
  Dataset d;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string line;
  size_t row_no = 0;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file (missing header)");
  if (trim(line) != kCsvHeader)
    throw std::runtime_error(path + ": row 1: unrecognized header (schema mismatch)");
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (int(f.size()) != kFeatureWidth + 4)
      throw std::runtime_error(path + ": row " + std::to_string(row_no + 1) +
                               ": expected " + std::to_string(kFeatureWidth + 4) +
                               " fields, got " + std::to_string(f.size()));
    DatasetRow row;
    row.case_id = f[0];
    auto field = [&](int col) -> double {
      try {
        return parse_double(f[col]);
      } catch (const std::exception& e) {
        throw std::runtime_error(path + ": row " + std::to_string(row_no + 1) +
                                 " column " + std::to_string(col + 1) + ": " + e.what());
      }
    };
    for (int i = 0; i < kFeatureWidth; ++i) row.raw[i] = field(1 + i);
    row.t_max_c = field(kFeatureWidth + 1);
    row.hotspot_z_um = field(kFeatureWidth + 2);
    const std::string& split = f[kFeatureWidth + 3];
    if (split == "train") row.split = 0;
    else if (split == "test") row.split = 1;
    else
      throw std::runtime_error(path + ": row " + std::to_string(row_no + 1) +
                               " column " + std::to_string(kFeatureWidth + 4) +
                               ": bad split label '" + split + "'");
    d.rows.push_back(std::move(row));
  }

  const std::string meta = read_file(path + ".meta");
  std::istringstream ms(meta);
  if (!std::getline(ms, line) || trim(line) != "hbmtherm-dataset-meta v1")
    throw std::runtime_error(path + ".meta: unrecognized metadata header");
  std::string norm_block;
  bool in_norm = false;
  while (std::getline(ms, line)) {
    if (starts_with(line, "normalization v")) in_norm = true;
    if (in_norm) {
      norm_block += line + "\n";
      continue;
    }
    const size_t eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = trim(line.substr(eq + 3));
    if (key == "config_hash") d.config_hash = std::stoull(value, nullptr, 16);
    else if (key == "plan_seed") d.plan_seed = std::stoull(value);
    else if (key == "solver_config_hash") d.solver_config_hash = std::stoull(value, nullptr, 16);
    else if (key == "raw_count") d.raw_count = std::stoull(value);
    else if (key == "excluded_count") d.excluded_count = std::stoull(value);
  }
  if (!in_norm)
    throw std::runtime_error(path + ".meta: missing normalization block");
  d.norm = NormalizationSpec::from_canonical_text(norm_block);
  return d;
}

}  // namespace hbmtherm
