#include "hbmtherm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hbmtherm/text_io.hpp"

namespace hbmtherm {

TargetMetrics compute_metrics(const std::vector<double>& preds,
                              const std::vector<double>& labels) {
  if (preds.empty()) throw std::invalid_argument("metrics: empty input");
  if (preds.size() != labels.size())
    throw std::invalid_argument("metrics: prediction/label lengths differ");
  TargetMetrics m;
  m.count = preds.size();
  double abs_sum = 0, ratio_sum = 0;
  size_t ratio_n = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double err = std::abs(preds[i] - labels[i]);
    m.max_e = std::max(m.max_e, err);
    abs_sum += err;
    if (labels[i] != 0) {
      ratio_sum += err / std::abs(labels[i]);
      ++ratio_n;
    } else {
      ++m.mar_excluded;
    }
  }
  m.mae = abs_sum / double(preds.size());
  m.mar = ratio_n ? ratio_sum / double(ratio_n) : 0.0;
  return m;
}

MetricsReport compute_report(const std::vector<int>& families,
                             const std::vector<double>& pred_t,
                             const std::vector<double>& true_t,
                             const std::vector<double>& pred_z,
                             const std::vector<double>& true_z) {
  MetricsReport r;
  r.t_overall = compute_metrics(pred_t, true_t);
  r.p_overall = compute_metrics(pred_z, true_z);
  std::map<int, std::vector<size_t>> by_family;
  for (size_t i = 0; i < families.size(); ++i) by_family[families[i]].push_back(i);
  for (const auto& [family, rows] : by_family) {
    std::vector<double> pt, tt, pz, tz;
    for (size_t i : rows) {
      pt.push_back(pred_t[i]);
      tt.push_back(true_t[i]);
      pz.push_back(pred_z[i]);
      tz.push_back(true_z[i]);
    }
    r.t_family[family] = compute_metrics(pt, tt);
    r.p_family[family] = compute_metrics(pz, tz);
    r.family_counts[family] = rows.size();
  }
  return r;
}

PositionErrorBins bin_position_errors(const std::vector<double>& pred_z,
                                      const std::vector<double>& true_z,
                                      const std::vector<const HbmStack*>& stacks) {
  if (pred_z.size() != true_z.size() || pred_z.size() != stacks.size())
    throw std::invalid_argument("position bins: aligned inputs required");
  PositionErrorBins bins;
  bins.count = pred_z.size();
  if (bins.count == 0) return bins;
  size_t n75 = 0, n25 = 0, beyond = 0, misplaced = 0;
  for (size_t i = 0; i < pred_z.size(); ++i) {
    const double err = std::abs(pred_z[i] - true_z[i]);
    if (err <= 7.5) ++n75;
    else if (err <= 25.0) ++n25;
    else ++beyond;
    if (stacks[i]->layer_of(pred_z[i]) != stacks[i]->layer_of(true_z[i])) ++misplaced;
  }
  const double n = double(bins.count);
  bins.within_7_5 = n75 / n;
  bins.within_25 = n25 / n;
  bins.beyond_25 = beyond / n;
  bins.misplaced = misplaced / n;
  return bins;
}

EvalVectors evaluate_on_split(const Checkpoint& ckpt, const Dataset& dataset,
                              const PresetTable& presets, const GeometryConfig& geo,
                              int split) {
  std::vector<size_t> rows;
  for (size_t i = 0; i < dataset.rows.size(); ++i)
    if (dataset.rows[i].split == split) rows.push_back(i);
  if (rows.empty()) throw std::invalid_argument("evaluate: empty split");

  Eigen::MatrixXd x(rows.size(), kFeatureWidth);
  for (size_t r = 0; r < rows.size(); ++r) {
    const FeatureVector f = normalize_features(dataset.rows[rows[r]].raw, ckpt.norm);
    for (int c = 0; c < kFeatureWidth; ++c) x(int(r), c) = f[c];
  }
  Eigen::VectorXd t_norm = Eigen::VectorXd::Zero(rows.size());
  Eigen::VectorXd p_norm = Eigen::VectorXd::Zero(rows.size());
  for (const auto& net : ckpt.nets) {
    ForwardResult fw = forward(net.spec, net.params, x, Mode::Eval, {});
    if (fw.t.size()) t_norm = fw.t;
    if (fw.p.size()) p_norm = fw.p;
  }

  EvalVectors out;
  for (size_t r = 0; r < rows.size(); ++r) {
    const DatasetRow& row = dataset.rows[rows[r]];
    const SampleCase c = decode_features(row.raw, presets);
    out.families.push_back(c.family);
    out.pred_t.push_back((t_norm(r) - ckpt.norm.t_offset) / ckpt.norm.t_scale);
    out.true_t.push_back(row.t_max_c);
    out.pred_z.push_back((p_norm(r) - ckpt.norm.z_offset) / ckpt.norm.z_scale);
    out.true_z.push_back(row.hotspot_z_um);
    out.stacks.push_back(build_stack(c, geo, presets));
  }
  return out;
}

namespace {

void append_metrics_row(std::string& csv, const std::string& target,
                        const std::string& scope, const TargetMetrics& m) {
  csv += target + "," + scope + "," + format_double(m.max_e) + "," +
         format_double(m.mae) + "," + format_double(m.mar) + "," +
         std::to_string(m.count) + "," + std::to_string(m.mar_excluded) + "\n";
}

void append_histogram(std::string& csv, const std::string& target,
                      const std::vector<double>& edges,
                      const std::vector<double>& preds,
                      const std::vector<double>& labels) {
  std::vector<size_t> counts(edges.size(), 0);  // last bucket: beyond the last edge
  for (size_t i = 0; i < preds.size(); ++i) {
    const double err = std::abs(preds[i] - labels[i]);
    size_t b = edges.size() - 1;
    for (size_t e = 0; e < edges.size() - 1; ++e)
      if (err <= edges[e + 1]) { b = e; break; }
    ++counts[b];
  }
  for (size_t e = 0; e + 1 < edges.size(); ++e)
    csv += target + "," + format_double(edges[e]) + "," + format_double(edges[e + 1]) +
           "," + std::to_string(counts[e]) + "\n";
  csv += target + "," + format_double(edges.back()) + ",inf," +
         std::to_string(counts.back()) + "\n";
}

}  // namespace

void export_report(const MetricsReport& report, const PositionErrorBins& bins,
                   uint64_t config_hash, const std::vector<int>& families,
                   const std::vector<double>& pred_t, const std::vector<double>& true_t,
                   const std::vector<double>& pred_z, const std::vector<double>& true_z,
                   const std::string& dir) {
  const std::string hash_line = "# config_hash = " + to_hex(config_hash) + "\n";

  std::string metrics = hash_line;
  metrics += "target,scope,max_e,mae,mar,count,mar_excluded\n";
  append_metrics_row(metrics, "t", "overall", report.t_overall);
  append_metrics_row(metrics, "p", "overall", report.p_overall);
  for (const auto& [family, m] : report.t_family)
    append_metrics_row(metrics, "t", "family_" + std::to_string(family), m);
  for (const auto& [family, m] : report.p_family)
    append_metrics_row(metrics, "p", "family_" + std::to_string(family), m);
  write_file(dir + "/metrics.csv", metrics);

  std::string summary = "evaluation summary (config " + to_hex(config_hash) + ")\n";
  summary += "samples: " + std::to_string(report.t_overall.count) + "\n";
  summary += "junction temperature: max-E " + format_double(report.t_overall.max_e) +
             " C, MAE " + format_double(report.t_overall.mae) + " C, MAR " +
             format_double(100.0 * report.t_overall.mar) + " %\n";
  summary += "hotspot position: max-E " + format_double(report.p_overall.max_e) +
             " um, MAE " + format_double(report.p_overall.mae) + " um, MAR " +
             format_double(100.0 * report.p_overall.mar) + " %\n";
  summary += "position errors within 7.5 um: " +
             format_double(100.0 * bins.within_7_5) + " %\n";
  summary += "position errors in (7.5, 25] um: " +
             format_double(100.0 * bins.within_25) + " %\n";
  summary += "position errors beyond 25 um: " +
             format_double(100.0 * bins.beyond_25) + " %\n";
  summary += "layer misplacement: " + format_double(100.0 * bins.misplaced) + " %\n";
  write_file(dir + "/summary.txt", summary);

  std::string scatter = hash_line;
  scatter += "family,true_t_c,pred_t_c,true_z_um,pred_z_um\n";
  for (size_t i = 0; i < families.size(); ++i)
    scatter += std::to_string(families[i]) + "," + format_double(true_t[i]) + "," +
               format_double(pred_t[i]) + "," + format_double(true_z[i]) + "," +
               format_double(pred_z[i]) + "\n";
  write_file(dir + "/scatter.csv", scatter);

  std::string hist = hash_line;
  hist += "target,bin_lo,bin_hi,count\n";
  append_histogram(hist, "t", {0, 0.25, 0.5, 1, 2, 5, 10}, pred_t, true_t);
  append_histogram(hist, "p", {0, 2.5, 7.5, 15, 25, 50, 100}, pred_z, true_z);
  write_file(dir + "/error_hist.csv", hist);

  std::string table = hash_line;
  table += "metric";
  for (const auto& [family, m] : report.t_family)
    table += ",family_" + std::to_string(family);
  table += "\n";
  auto row = [&](const std::string& name, auto getter, bool position) {
    table += name;
    const auto& source = position ? report.p_family : report.t_family;
    for (const auto& [family, m] : source) table += "," + format_double(getter(m));
    table += "\n";
  };
  row("t_mae_c", [](const TargetMetrics& m) { return m.mae; }, false);
  row("t_mar_pct", [](const TargetMetrics& m) { return 100.0 * m.mar; }, false);
  row("p_mae_um", [](const TargetMetrics& m) { return m.mae; }, true);
  row("p_mar_pct", [](const TargetMetrics& m) { return 100.0 * m.mar; }, true);
  write_file(dir + "/family_table.csv", table);
}

std::map<std::string, TargetMetrics> load_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics: " + path);
  std::map<std::string, TargetMetrics> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) { header_seen = true; continue; }
    auto f = split_csv(line);
    if (f.size() != 7) throw std::runtime_error(path + ": malformed metrics row");
    TargetMetrics m;
    m.max_e = parse_double(f[2]);
    m.mae = parse_double(f[3]);
    m.mar = parse_double(f[4]);
    m.count = size_t(parse_int(f[5]));
    m.mar_excluded = size_t(parse_int(f[6]));
    out[f[0] + "/" + f[1]] = m;
  }
  return out;
}

std::vector<SweepRow> batch_size_sweep(const Dataset& dataset, const std::string& arch_label,
                                       const TrainConfig& base_cfg,
                                       const std::vector<int>& sizes,
                                       const PresetTable& presets,
                                       const GeometryConfig& geo,
                                       const std::string& dir) {
  if (sizes.empty()) throw std::invalid_argument("batch sweep: no sizes");
  std::vector<SweepRow> rows;
  for (int size : sizes) {
    TrainConfig cfg = base_cfg;
    cfg.batch_size = size;
    cfg.batch_size_two_net = size;
    Checkpoint ckpt = train_model(arch_label, dataset, cfg, 0);
    EvalVectors ev = evaluate_on_split(ckpt, dataset, presets, geo, 1);
    SweepRow row;
    row.batch_size = size;
    row.mar_t = compute_metrics(ev.pred_t, ev.true_t).mar;
    row.mar_p = compute_metrics(ev.pred_z, ev.true_z).mar;
    row.mean_mar = 0.5 * (row.mar_t + row.mar_p);
    rows.push_back(row);
  }
  if (!dir.empty()) {
    std::string csv = "batch_size,mar_t,mar_p,mean_mar\n";
    for (const auto& r : rows)
      csv += std::to_string(r.batch_size) + "," + format_double(r.mar_t) + "," +
             format_double(r.mar_p) + "," + format_double(r.mean_mar) + "\n";
    write_file(dir + "/batch_sweep.csv", csv);
  }
  return rows;
}

}  // namespace hbmtherm
