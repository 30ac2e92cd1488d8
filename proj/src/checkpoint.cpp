#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hbmtherm/mlp.hpp"
#include "hbmtherm/text_io.hpp"

namespace hbmtherm {

// Checkpoint container, text, versioned. Shortest-exact decimal floats make
// save/load bit-exact. Layout:
//   hbmtherm-checkpoint v1
//   arch = <label>
//   config_hash = <hex>
//   <normalization block>
//   nets = <count>
//   per net: "net <i>", spec line, adam_t, history, tensors (params, adam m,
//   adam v in the same fixed tensor order), "end net <i>"
//   end checkpoint

namespace {

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::OneNetTwoOut: return "one_net_two_out";
    case Arch::OneNetTwoOutBaseline: return "one_net_two_out_baseline";
    case Arch::TempNet: return "temp_net";
    case Arch::PosNet: return "pos_net";
  }
  return "?";
}

Arch arch_from_name(const std::string& s) {
  if (s == "one_net_two_out") return Arch::OneNetTwoOut;
  if (s == "one_net_two_out_baseline") return Arch::OneNetTwoOutBaseline;
  if (s == "temp_net") return Arch::TempNet;
  if (s == "pos_net") return Arch::PosNet;
  throw std::runtime_error("checkpoint: unknown net kind '" + s + "'");
}

void write_tensor(std::string& out, const char* name, const double* data,
                  int rows, int cols) {
  out += "tensor ";
  out += name;
  out += ' ' + std::to_string(rows) + ' ' + std::to_string(cols) + '\n';
  // Eigen default storage is column-major; serialize row by row regardless.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c) out += ' ';
      out += format_double(data[size_t(c) * rows + r]);
    }
    out += '\n';
  }
}

void write_params(std::string& out, const NetParams& p) {
  for (size_t l = 0; l < p.w.size(); ++l) {
    write_tensor(out, ("w" + std::to_string(l)).c_str(), p.w[l].data(),
                 int(p.w[l].rows()), int(p.w[l].cols()));
    write_tensor(out, ("b" + std::to_string(l)).c_str(), p.b[l].data(),
                 int(p.b[l].size()), 1);
  }
  if (p.wt.size()) {
    write_tensor(out, "wt", p.wt.data(), 1, int(p.wt.size()));
    write_tensor(out, "bt", p.bt.data(), 1, 1);
  }
  if (p.wp.size()) {
    write_tensor(out, "wp", p.wp.data(), 1, int(p.wp.size()));
    write_tensor(out, "bp", p.bp.data(), 1, 1);
  }
}

class LineReader {
 public:
  LineReader(std::istream& in, const std::string& context) : in_(in), context_(context) {}

  std::string next() {
    std::string line;
    if (!std::getline(in_, line))
      throw std::runtime_error(context_ + ": truncated file");
    ++line_no_;
    return line;
  }

  std::string expect_prefix(const std::string& prefix) {
    std::string line = next();
    if (!starts_with(line, prefix))
      throw std::runtime_error(context_ + ": line " + std::to_string(line_no_) +
                               ": expected '" + prefix + "'");
    return trim(line.substr(prefix.size()));
  }

 private:
  std::istream& in_;
  std::string context_;
  int line_no_ = 0;
};

void read_tensor(LineReader& reader, const std::string& name, double* data,
                 int rows, int cols) {
  std::string header = reader.expect_prefix("tensor " + name + " ");
  std::istringstream hs(header);
  int r = 0, c = 0;
  hs >> r >> c;
  if (r != rows || c != cols)
    throw std::runtime_error("checkpoint: tensor " + name + " has shape " +
                             std::to_string(r) + "x" + std::to_string(c) +
                             ", expected " + std::to_string(rows) + "x" +
                             std::to_string(cols));
  for (int i = 0; i < rows; ++i) {
    std::istringstream ls(reader.next());
    std::string tok;
    for (int j = 0; j < cols; ++j) {
      if (!(ls >> tok))
        throw std::runtime_error("checkpoint: tensor " + name + ": short row");
      data[size_t(j) * rows + i] = parse_double(tok);
    }
  }
}

void read_params(LineReader& reader, NetParams& p) {
  for (size_t l = 0; l < p.w.size(); ++l) {
    read_tensor(reader, "w" + std::to_string(l), p.w[l].data(),
                int(p.w[l].rows()), int(p.w[l].cols()));
    read_tensor(reader, "b" + std::to_string(l), p.b[l].data(),
                int(p.b[l].size()), 1);
  }
  if (p.wt.size()) {
    read_tensor(reader, "wt", p.wt.data(), 1, int(p.wt.size()));
    read_tensor(reader, "bt", p.bt.data(), 1, 1);
  }
  if (p.wp.size()) {
    read_tensor(reader, "wp", p.wp.data(), 1, int(p.wp.size()));
    read_tensor(reader, "bp", p.bp.data(), 1, 1);
  }
}

std::string spec_line(const NetSpec& s) {
  std::string hidden;
  for (size_t i = 0; i < s.hidden.size(); ++i)
    hidden += (i ? "," : "") + std::to_string(s.hidden[i]);
  return std::string("spec = kind:") + arch_name(s.arch) +
         " input:" + std::to_string(s.input_width) + " hidden:" + hidden +
         " t_tap:" + std::to_string(s.t_tap) +
         " p_head:" + (s.p_head ? "1" : "0") +
         " dropout_after:" + std::to_string(s.dropout_after) +
         " dropout_p:" + format_double(s.dropout_p) +
         " p_scale:" + format_double(s.p_output_scale);
}

NetSpec parse_spec_line(const std::string& text) {
  NetSpec s;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    const size_t colon = tok.find(':');
    if (colon == std::string::npos)
      throw std::runtime_error("checkpoint: malformed spec token '" + tok + "'");
    const std::string key = tok.substr(0, colon);
    const std::string value = tok.substr(colon + 1);
    if (key == "kind") s.arch = arch_from_name(value);
    else if (key == "input") s.input_width = int(parse_int(value));
    else if (key == "hidden") {
      s.hidden.clear();
      for (const auto& h : split_csv(value)) s.hidden.push_back(int(parse_int(h)));
    } else if (key == "t_tap") s.t_tap = int(parse_int(value));
    else if (key == "p_head") s.p_head = parse_int(value) != 0;
    else if (key == "dropout_after") s.dropout_after = int(parse_int(value));
    else if (key == "dropout_p") s.dropout_p = parse_double(value);
    else if (key == "p_scale") s.p_output_scale = parse_double(value);
    else throw std::runtime_error("checkpoint: unknown spec key '" + key + "'");
  }
  validate(s);
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out = "hbmtherm-checkpoint v1\n";
  out += "arch = " + ckpt.arch_label + "\n";
  out += "config_hash = " + to_hex(ckpt.config_hash) + "\n";
  out += ckpt.norm.canonical_text();
  out += "nets = " + std::to_string(ckpt.nets.size()) + "\n";
  for (size_t i = 0; i < ckpt.nets.size(); ++i) {
    const TrainedNet& net = ckpt.nets[i];
    out += "net " + std::to_string(i) + "\n";
    out += spec_line(net.spec) + "\n";
    out += "adam_t = " + std::to_string(net.adam.t) + "\n";
    out += "history_rows = " + std::to_string(net.history.size()) + "\n";
    for (const auto& row : net.history)
      out += std::to_string(row.epoch) + "," + format_double(row.lr) + "," +
             format_double(row.train_loss) + "," + format_double(row.test_loss) + "\n";
    write_params(out, net.params);
    write_params(out, net.adam.m);
    write_params(out, net.adam.v);
    out += "end net " + std::to_string(i) + "\n";
  }
  out += "end checkpoint\n";
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  LineReader reader(in, path);
  if (trim(reader.next()) != "hbmtherm-checkpoint v1")
    throw std::runtime_error(path + ": unrecognized checkpoint header");
  Checkpoint ckpt;
  ckpt.arch_label = reader.expect_prefix("arch = ");
  ckpt.config_hash = std::stoull(reader.expect_prefix("config_hash = "), nullptr, 16);
  std::string norm_block = reader.next() + "\n";
  for (;;) {
    std::string line = reader.next();
    norm_block += line + "\n";
    if (trim(line) == "end normalization") break;
  }
  ckpt.norm = NormalizationSpec::from_canonical_text(norm_block);
  const long long net_count = parse_int(reader.expect_prefix("nets = "));
  for (long long i = 0; i < net_count; ++i) {
    reader.expect_prefix("net " + std::to_string(i));
    TrainedNet net;
    net.spec = parse_spec_line(reader.expect_prefix("spec = "));
    net.params = init_params(net.spec, 0);  // allocate shapes
    net.adam = make_adam_state(net.spec);
    net.adam.t = parse_int(reader.expect_prefix("adam_t = "));
    const long long rows = parse_int(reader.expect_prefix("history_rows = "));
    for (long long r = 0; r < rows; ++r) {
      auto f = split_csv(reader.next());
      if (f.size() != 4)
        throw std::runtime_error(path + ": malformed history row");
      HistoryRow row;
      row.epoch = int(parse_int(f[0]));
      row.lr = parse_double(f[1]);
      row.train_loss = parse_double(f[2]);
      row.test_loss = parse_double(f[3]);
      net.history.push_back(row);
    }
    read_params(reader, net.params);
    read_params(reader, net.adam.m);
    read_params(reader, net.adam.v);
    reader.expect_prefix("end net " + std::to_string(i));
    ckpt.nets.push_back(std::move(net));
  }
  reader.expect_prefix("end checkpoint");
  return ckpt;
}

}  // namespace hbmtherm
