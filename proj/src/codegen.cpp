#include "rotorlab/codegen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>

#include "rotorlab/hash.hpp"

namespace rotorlab {
namespace {

double as_float(double v) { return static_cast<double>(static_cast<float>(v)); }

bool is_layer(OpKind op) { return op == OpKind::matmul || op == OpKind::affine; }

// Byte writer for the little-endian formats.
struct Writer {
  std::vector<std::uint8_t> bytes;
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    u32(static_cast<std::uint32_t>(bits));
    u32(static_cast<std::uint32_t>(bits >> 32));
  }
};

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  std::uint32_t u32(const char* what) {
    if (pos + 4 > bytes.size()) throw BlobError(std::string("weights blob truncated while reading ") + what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[pos + k]) << (8 * k);
    pos += 4;
    return v;
  }
  double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }
};

void write_nodes(Writer& w, const FrozenGraph& g, bool wide) {
  w.u32(static_cast<std::uint32_t>(g.outputs.size()));
  for (const OutputSlot& s : g.outputs) {
    w.i32(s.source);
    wide ? w.f64(s.constant) : w.f32(s.constant);
  }
  w.u32(static_cast<std::uint32_t>(g.nodes.size()));
  for (const GraphNode& n : g.nodes) {
    w.u32(static_cast<std::uint32_t>(n.op));
    w.u32(static_cast<std::uint32_t>(n.rows));
    w.u32(static_cast<std::uint32_t>(n.cols));
    w.u32(static_cast<std::uint32_t>(n.weights.size()));
    w.u32(static_cast<std::uint32_t>(n.bias.size()));
    for (double v : n.weights) wide ? w.f64(v) : w.f32(v);
    for (double v : n.bias) wide ? w.f64(v) : w.f32(v);
  }
}

void remove_row(GraphNode& n, std::size_t r) {
  if (is_layer(n.op)) {
    n.weights.erase(n.weights.begin() + static_cast<std::ptrdiff_t>(r * n.cols),
                    n.weights.begin() + static_cast<std::ptrdiff_t>((r + 1) * n.cols));
  }
  if (!n.bias.empty()) n.bias.erase(n.bias.begin() + static_cast<std::ptrdiff_t>(r));
  if (n.op == OpKind::scale) n.weights.erase(n.weights.begin() + static_cast<std::ptrdiff_t>(r));
  --n.rows;
  if (!is_layer(n.op)) --n.cols;
}

void remove_column(GraphNode& n, std::size_t c) {
  std::vector<double> w;
  w.reserve(n.rows * (n.cols - 1));
  for (std::size_t r = 0; r < n.rows; ++r) {
    for (std::size_t j = 0; j < n.cols; ++j) {
      if (j != c) w.push_back(n.weights[r * n.cols + j]);
    }
  }
  n.weights = std::move(w);
  --n.cols;
}

// Pass: matmul immediately followed by a matching bias_add becomes one affine node.
bool fuse_bias(FrozenGraph& g) {
  bool changed = false;
  for (std::size_t i = 0; i + 1 < g.nodes.size(); ++i) {
    GraphNode& a = g.nodes[i];
    const GraphNode& b = g.nodes[i + 1];
    if (a.op == OpKind::matmul && b.op == OpKind::bias_add && b.rows == a.rows) {
      a.op = OpKind::affine;
      a.bias = b.bias;
      g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(i + 1));
      changed = true;
    }
  }
  for (GraphNode& n : g.nodes) {
    if (n.op == OpKind::matmul) {
      n.op = OpKind::affine;
      n.bias.assign(n.rows, 0.0);
      changed = true;
    }
  }
  return changed;
}

// Pass: an input scale feeding an affine node is folded into its columns.
bool fold_scale(FrozenGraph& g) {
  bool changed = false;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].op != OpKind::scale) continue;
    const std::vector<double> s = g.nodes[i].weights;
    const bool unit = std::all_of(s.begin(), s.end(), [](double v) { return v == 1.0; });
    if (!unit) {
      if (i + 1 >= g.nodes.size() || g.nodes[i + 1].op != OpKind::affine) continue;
      GraphNode& next = g.nodes[i + 1];
      for (std::size_t r = 0; r < next.rows; ++r) {
        for (std::size_t c = 0; c < next.cols; ++c) next.weights[r * next.cols + c] *= s[c];
      }
    }
    g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(i));
    --i;
    changed = true;
  }
  return changed;
}

// Index of the next affine node after `i` if only elementwise tanh nodes lie
// between; nodes.size() if `i` is the last layer; npos if the chain is not
// of that shape.
constexpr std::size_t npos = static_cast<std::size_t>(-1);

std::size_t next_layer(const FrozenGraph& g, std::size_t i) {
  for (std::size_t k = i + 1; k < g.nodes.size(); ++k) {
    if (g.nodes[k].op == OpKind::affine) return k;
    if (g.nodes[k].op != OpKind::tanh) return npos;
  }
  return g.nodes.size();
}

double activate(const FrozenGraph& g, std::size_t i, std::size_t j, double v) {
  for (std::size_t k = i + 1; k < j; ++k) {
    if (g.nodes[k].op == OpKind::tanh) v = std::tanh(v);
  }
  return v;
}

void remove_neuron(FrozenGraph& g, std::size_t i, std::size_t j, std::size_t r) {
  remove_row(g.nodes[i], r);
  for (std::size_t k = i + 1; k < j; ++k) remove_row(g.nodes[k], r);
  if (j < g.nodes.size()) {
    remove_column(g.nodes[j], r);
  } else {
    for (OutputSlot& s : g.outputs) {
      if (s.source > static_cast<std::int32_t>(r)) --s.source;
    }
  }
}

// Pass: zero-weight rows are constant neurons. Hidden ones are folded into
// the next layer's bias; output ones become constant stubs.
bool fold_constant_rows(FrozenGraph& g, OptimizeStats& st) {
  bool changed = false;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].op != OpKind::affine) continue;
    const std::size_t j = next_layer(g, i);
    if (j == npos) continue;
    for (std::size_t r = g.nodes[i].rows; r-- > 0;) {
      const GraphNode& n = g.nodes[i];
      if (n.rows <= 1) break;
      const bool zero = std::all_of(n.weights.begin() + static_cast<std::ptrdiff_t>(r * n.cols),
                                    n.weights.begin() + static_cast<std::ptrdiff_t>((r + 1) * n.cols),
                                    [](double v) { return v == 0.0; });
      if (!zero) continue;
      const double c = activate(g, i, j, n.bias[r]);
      if (j < g.nodes.size()) {
        GraphNode& next = g.nodes[j];
        for (std::size_t q = 0; q < next.rows; ++q) next.bias[q] += next.weights[q * next.cols + r] * c;
      } else {
        for (OutputSlot& s : g.outputs) {
          if (s.source == static_cast<std::int32_t>(r)) {
            s.source = -1;
            s.constant = c;
            ++st.outputs_stubbed;
          }
        }
      }
      remove_neuron(g, i, j, r);
      ++st.neurons_removed;
      changed = true;
    }
  }
  return changed;
}

// Pass: neurons nobody reads. Hidden: all-zero outgoing column. Output layer:
// rows not referenced by any output slot.
bool eliminate_dead(FrozenGraph& g, OptimizeStats& st) {
  bool changed = false;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].op != OpKind::affine) continue;
    const std::size_t j = next_layer(g, i);
    if (j == npos) continue;
    for (std::size_t r = g.nodes[i].rows; r-- > 0;) {
      if (g.nodes[i].rows <= 1) break;
      bool dead = true;
      if (j < g.nodes.size()) {
        const GraphNode& next = g.nodes[j];
        for (std::size_t q = 0; q < next.rows && dead; ++q) dead = next.weights[q * next.cols + r] == 0.0;
      } else {
        for (const OutputSlot& s : g.outputs) dead = dead && s.source != static_cast<std::int32_t>(r);
      }
      if (!dead) continue;
      remove_neuron(g, i, j, r);
      ++st.neurons_removed;
      changed = true;
    }
  }
  return changed;
}

void append_literal(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
  std::string s = buf;
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  out += s;
  out += 'f';
}

void emit_array(std::string& out, const std::string& name, const std::vector<double>& values) {
  out += "static const float " + name + "[" + std::to_string(values.size()) + "] = {";
  for (std::size_t k = 0; k < values.size(); ++k) {
    out += (k % 8 == 0) ? "\n    " : " ";
    append_literal(out, values[k]);
    if (k + 1 < values.size()) out += ',';
  }
  out += "\n};\n";
}

}  // namespace

const char* to_string(OpKind op) {
  switch (op) {
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::bias_add: return "bias_add";
    case OpKind::affine: return "affine";
    case OpKind::tanh: return "tanh";
  }
  return "?";
}

void FrozenGraph::validate() const {
  std::size_t width = input_dim;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const GraphNode& n = nodes[k];
    const std::string where = "node " + std::to_string(k) + " (" + to_string(n.op) + ")";
    if (n.cols != width) throw InvalidInput(where + " expects width " + std::to_string(n.cols) + ", got " + std::to_string(width));
    std::size_t nw = 0, nb = 0;
    switch (n.op) {
      case OpKind::scale: nw = n.cols; break;
      case OpKind::matmul: nw = n.rows * n.cols; break;
      case OpKind::affine: nw = n.rows * n.cols; nb = n.rows; break;
      case OpKind::bias_add: nb = n.rows; break;
      case OpKind::tanh: break;
    }
    if (!is_layer(n.op) && n.rows != n.cols) throw InvalidInput(where + " must be elementwise");
    if (n.weights.size() != nw || n.bias.size() != nb) throw InvalidInput(where + " has the wrong number of constants");
    for (double v : n.weights) {
      if (!std::isfinite(v)) throw InvalidInput(where + " has a non-finite weight");
    }
    for (double v : n.bias) {
      if (!std::isfinite(v)) throw InvalidInput(where + " has a non-finite bias");
    }
    width = n.rows;
  }
  if (outputs.size() != output_dim) throw InvalidInput("graph output table does not match output_dim");
  for (const OutputSlot& s : outputs) {
    if (s.source >= static_cast<std::int32_t>(width) || s.source < -1) throw InvalidInput("graph output slot out of range");
  }
}

void FrozenGraph::evaluate(std::span<const double> in, std::span<double> out, Precision precision) const {
  if (in.size() != input_dim) throw InvalidInput("graph expects " + std::to_string(input_dim) + " inputs");
  if (out.size() != output_dim) throw InvalidInput("graph output buffer has the wrong length");
  const bool narrow = precision == Precision::emitted;
  auto k = [narrow](double v) { return narrow ? as_float(v) : v; };

  std::vector<double> cur(in.begin(), in.end());
  if (narrow) {
    for (double& v : cur) v = as_float(v);
  }
  std::vector<double> next;
  for (const GraphNode& n : nodes) {
    switch (n.op) {
      case OpKind::scale:
        for (std::size_t j = 0; j < n.cols; ++j) cur[j] = cur[j] * k(n.weights[j]);
        break;
      case OpKind::matmul:
      case OpKind::affine:
        next.assign(n.rows, 0.0);
        for (std::size_t r = 0; r < n.rows; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < n.cols; ++c) acc += k(n.weights[r * n.cols + c]) * cur[c];
          if (n.op == OpKind::affine) acc += k(n.bias[r]);
          next[r] = acc;
        }
        cur.swap(next);
        break;
      case OpKind::bias_add:
        for (std::size_t r = 0; r < n.rows; ++r) cur[r] += k(n.bias[r]);
        break;
      case OpKind::tanh:
        for (double& v : cur) v = std::tanh(v);
        break;
    }
  }
  for (std::size_t m = 0; m < output_dim; ++m) {
    const OutputSlot& s = outputs[m];
    out[m] = k(s.source < 0 ? s.constant : cur[static_cast<std::size_t>(s.source)]);
  }
}

std::vector<double> FrozenGraph::evaluate(std::span<const double> in, Precision precision) const {
  std::vector<double> out(output_dim);
  evaluate(in, out, precision);
  return out;
}

std::size_t FrozenGraph::affine_layer_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const GraphNode& n) { return is_layer(n.op); }));
}

std::size_t FrozenGraph::activation_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const GraphNode& n) { return n.op == OpKind::tanh; }));
}

std::size_t FrozenGraph::constant_count() const {
  std::size_t total = 0;
  for (const GraphNode& n : nodes) total += n.weights.size() + n.bias.size();
  return total;
}

std::size_t FrozenGraph::max_width() const {
  std::size_t width = input_dim;
  for (const GraphNode& n : nodes) width = std::max(width, n.rows);
  return width;
}

std::string serialize_graph(const FrozenGraph& g) {
  Writer w;
  w.u32(0x47464c52);  // "RLFG"
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(g.input_dim));
  w.u32(static_cast<std::uint32_t>(g.output_dim));
  write_nodes(w, g, true);
  return std::string(w.bytes.begin(), w.bytes.end());
}

void rehash(FrozenGraph& g) { g.hash = sha256_hex(serialize_graph(g)); }

FrozenGraph freeze(const Checkpoint& ckpt) {
  const Mlp& net = ckpt.policy.mean;
  net.validate();
  FrozenGraph g;
  g.input_dim = net.input_dim();
  g.output_dim = net.output_dim();

  GraphNode scale;
  scale.op = OpKind::scale;
  scale.rows = scale.cols = g.input_dim;
  scale.weights = net.input_scale;
  g.nodes.push_back(std::move(scale));

  for (const DenseLayer& layer : net.layers) {
    GraphNode mm;
    mm.op = OpKind::matmul;
    mm.rows = layer.rows;
    mm.cols = layer.cols;
    mm.weights = layer.weight;
    g.nodes.push_back(std::move(mm));

    GraphNode ba;
    ba.op = OpKind::bias_add;
    ba.rows = ba.cols = layer.rows;
    ba.bias = layer.bias;
    g.nodes.push_back(std::move(ba));

    if (layer.activation == Activation::tanh) {
      GraphNode act;
      act.op = OpKind::tanh;
      act.rows = act.cols = layer.rows;
      g.nodes.push_back(std::move(act));
    }
  }
  for (std::size_t m = 0; m < g.output_dim; ++m) g.outputs.push_back({static_cast<std::int32_t>(m), 0.0});
  g.validate();
  rehash(g);
  return g;
}

FrozenGraph optimize(const FrozenGraph& input, OptimizeStats* stats) {
  input.validate();
  OptimizeStats st;
  st.bytes_before = serialize_graph(input).size();
  st.nodes_before = input.nodes.size();
  st.constants_before = input.constant_count();

  FrozenGraph g = input;
  bool changed = true;
  while (changed) {
    changed = false;
    changed |= fuse_bias(g);
    changed |= fold_scale(g);
    changed |= fold_constant_rows(g, st);
    changed |= eliminate_dead(g, st);
  }
  g.validate();
  rehash(g);

  st.bytes_after = serialize_graph(g).size();
  st.nodes_after = g.nodes.size();
  st.constants_after = g.constant_count();
  if (stats) *stats = st;
  return g;
}

std::vector<std::uint8_t> write_weights_blob(const FrozenGraph& g) {
  g.validate();
  Writer w;
  w.u32(kBlobMagic);
  w.u32(kBlobVersion);
  w.u32(static_cast<std::uint32_t>(g.input_dim));
  w.u32(static_cast<std::uint32_t>(g.output_dim));
  write_nodes(w, g, false);
  return w.bytes;
}

BlobHeader parse_blob_header(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  BlobHeader h;
  h.magic = r.u32("magic");
  if (h.magic != kBlobMagic) throw BlobError("not a weights blob (bad magic)");
  h.version = r.u32("version");
  if (h.version != kBlobVersion) throw BlobError("unsupported weights blob version " + std::to_string(h.version));
  h.obs_dim = r.u32("obs_dim");
  h.act_dim = r.u32("act_dim");
  return h;
}

FrozenGraph parse_weights_blob(std::span<const std::uint8_t> bytes) {
  const BlobHeader h = parse_blob_header(bytes);
  Reader r{bytes, 16};
  FrozenGraph g;
  g.input_dim = h.obs_dim;
  g.output_dim = h.act_dim;
  const std::uint32_t n_out = r.u32("output count");
  for (std::uint32_t m = 0; m < n_out; ++m) {
    OutputSlot s;
    s.source = static_cast<std::int32_t>(r.u32("output slot"));
    s.constant = r.f32("output constant");
    g.outputs.push_back(s);
  }
  const std::uint32_t n_nodes = r.u32("node count");
  for (std::uint32_t k = 0; k < n_nodes; ++k) {
    GraphNode n;
    const std::uint32_t op = r.u32("node op");
    if (op < 1 || op > 5) throw BlobError("unknown node op " + std::to_string(op));
    n.op = static_cast<OpKind>(op);
    n.rows = r.u32("node rows");
    n.cols = r.u32("node cols");
    const std::uint32_t nw = r.u32("weight count");
    const std::uint32_t nb = r.u32("bias count");
    if (static_cast<std::size_t>(nw) + nb > (bytes.size() - r.pos) / 4) throw BlobError("weights blob truncated in node " + std::to_string(k));
    n.weights.resize(nw);
    n.bias.resize(nb);
    for (double& v : n.weights) v = r.f32("weight");
    for (double& v : n.bias) v = r.f32("bias");
    g.nodes.push_back(std::move(n));
  }
  if (r.pos != bytes.size()) throw BlobError("trailing bytes after weights blob");
  try {
    g.validate();
  } catch (const InvalidInput& e) {
    throw BlobError(std::string("inconsistent weights blob: ") + e.what());
  }
  rehash(g);
  return g;
}

EmittedArtifact emit_source(const FrozenGraph& g, const std::string& symbol) {
  g.validate();
  if (symbol.empty() || !(std::isalpha(static_cast<unsigned char>(symbol[0])) || symbol[0] == '_') ||
      !std::all_of(symbol.begin(), symbol.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; })) {
    throw InvalidInput("'" + symbol + "' is not a valid C identifier");
  }
  const std::string in_n = std::to_string(g.input_dim);
  const std::string out_n = std::to_string(g.output_dim);
  const std::string width = std::to_string(g.max_width());

  EmittedArtifact art;
  art.symbol = symbol;
  std::string& s = art.source;
  s += "/* " + symbol + ": generated inference function, " + in_n + " inputs, " + out_n + " outputs.\n";
  s += " * graph " + g.hash + "\n */\n";
  s += "#include <math.h>\n\n";

  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const GraphNode& n = g.nodes[k];
    const std::string base = symbol + "_n" + std::to_string(k);
    if (!n.weights.empty()) emit_array(s, base + "_w", n.weights);
    if (!n.bias.empty()) emit_array(s, base + "_b", n.bias);
    art.weight_constants += n.weights.size() + n.bias.size();
  }

  s += "\nvoid " + symbol + "(const float in[" + in_n + "], float out[" + out_n + "])\n{\n";
  s += "    double a[" + width + "];\n    double b[" + width + "];\n    double acc;\n    int i, j;\n";
  s += "    (void)acc; (void)i; (void)j;\n";
  s += "    for (i = 0; i < " + in_n + "; ++i) a[i] = (double)in[i];\n";
  // cur/other alternate between the two buffers as layers change width.
  std::string cur = "a", other = "b";
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const GraphNode& n = g.nodes[k];
    const std::string base = symbol + "_n" + std::to_string(k);
    const std::string rows = std::to_string(n.rows), cols = std::to_string(n.cols);
    s += "    /* " + std::string(to_string(n.op)) + " " + rows + "x" + cols + " */\n";
    switch (n.op) {
      case OpKind::scale:
        s += "    for (i = 0; i < " + cols + "; ++i) " + cur + "[i] = " + cur + "[i] * (double)" + base + "_w[i];\n";
        break;
      case OpKind::matmul:
      case OpKind::affine:
        s += "    for (i = 0; i < " + rows + "; ++i) {\n";
        s += "        acc = 0.0;\n";
        s += "        for (j = 0; j < " + cols + "; ++j) acc += (double)" + base + "_w[i * " + cols + " + j] * " + cur + "[j];\n";
        if (n.op == OpKind::affine) s += "        acc += (double)" + base + "_b[i];\n";
        s += "        " + other + "[i] = acc;\n    }\n";
        std::swap(cur, other);
        break;
      case OpKind::bias_add:
        s += "    for (i = 0; i < " + rows + "; ++i) " + cur + "[i] += (double)" + base + "_b[i];\n";
        break;
      case OpKind::tanh:
        s += "    for (i = 0; i < " + rows + "; ++i) " + cur + "[i] = tanh(" + cur + "[i]);\n";
        break;
    }
  }
  for (std::size_t m = 0; m < g.output_dim; ++m) {
    const OutputSlot& slot = g.outputs[m];
    s += "    out[" + std::to_string(m) + "] = ";
    if (slot.source < 0) {
      append_literal(s, slot.constant);
      s += ";  /* eliminated row */\n";
    } else {
      s += "(float)" + cur + "[" + std::to_string(slot.source) + "];\n";
    }
  }
  s += "}\n";

  art.weights_blob = write_weights_blob(g);
  return art;
}

std::string EquivalenceReport::summary() const {
  std::ostringstream os;
  if (vacuous) {
    os << "PASS (vacuous): no probes";
    return os.str();
  }
  os << (passed ? "PASS" : "FAIL") << ": " << probes << " probes, max abs error " << max_abs_error << " (tolerance " << tolerance
     << ")";
  if (!passed) {
    os << ", worst output " << worst_output << " at probe [";
    for (std::size_t k = 0; k < worst_probe.size(); ++k) os << (k ? ", " : "") << worst_probe[k];
    os << "]";
  }
  return os.str();
}

EquivalenceReport verify_equivalence(const FrozenGraph& g, const Checkpoint& ckpt, std::size_t probes, std::uint64_t seed,
                                     double tolerance, double range) {
  g.validate();
  ckpt.policy.validate();
  if (g.input_dim != ckpt.policy.obs_dim() || g.output_dim != ckpt.policy.act_dim()) {
    throw InvalidInput("graph and checkpoint dimensions differ");
  }
  EquivalenceReport rep;
  rep.tolerance = tolerance;
  rep.probes = probes;
  rep.vacuous = probes == 0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<double> x(g.input_dim), got(g.output_dim);
  for (std::size_t p = 0; p < probes; ++p) {
    for (double& v : x) v = as_float(dist(rng));
    g.evaluate(x, got, Precision::emitted);
    const std::vector<double> want = forward_mean(ckpt.policy, x);
    for (std::size_t m = 0; m < g.output_dim; ++m) {
      const double err = std::abs(got[m] - want[m]);
      const double e = std::isnan(err) ? INFINITY : err;
      if (rep.worst_probe.empty() || e > rep.max_abs_error) {
        rep.max_abs_error = e;
        rep.worst_probe = x;
        rep.worst_output = m;
      }
    }
  }
  rep.passed = rep.max_abs_error <= tolerance;
  return rep;
}

}  // namespace rotorlab
