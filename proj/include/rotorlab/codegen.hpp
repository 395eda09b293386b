#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rotorlab/checkpoint.hpp"

namespace rotorlab {

/// Node kinds of an inference graph. A freshly frozen graph mirrors the
/// training network op for op (scale, matmul, bias_add, tanh); optimization
/// rewrites it into fused affine + tanh nodes.
enum class OpKind : std::uint32_t { scale = 1, matmul = 2, bias_add = 3, affine = 4, tanh = 5 };

const char* to_string(OpKind op);

struct GraphNode {
  OpKind op = OpKind::affine;
  std::size_t rows = 0;  // output width
  std::size_t cols = 0;  // input width
  std::vector<double> weights;  // matmul/affine: rows*cols row-major; scale: cols entries
  std::vector<double> bias;     // bias_add/affine: rows entries

  bool operator==(const GraphNode&) const = default;
};

/// Where each graph output comes from: an entry of the final value vector,
/// or a constant when the optimizer removed that row.
struct OutputSlot {
  std::int32_t source = -1;
  double constant = 0.0;

  bool operator==(const OutputSlot&) const = default;
};

enum class Precision {
  reference,  // float64 constants, float64 arithmetic
  emitted,    // float32 constants and I/O, float64 accumulation (what the generated C computes)
};

struct FrozenGraph {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<GraphNode> nodes;
  std::vector<OutputSlot> outputs;
  std::string hash;  // sha256 of the canonical serialization

  void evaluate(std::span<const double> in, std::span<double> out, Precision precision = Precision::reference) const;
  std::vector<double> evaluate(std::span<const double> in, Precision precision = Precision::reference) const;

  std::size_t affine_layer_count() const;  // matmul and affine nodes
  std::size_t activation_count() const;
  std::size_t constant_count() const;      // scalars stored in node weights and biases
  std::size_t max_width() const;

  void validate() const;
};

/// Canonical float64 serialization; its digest is FrozenGraph::hash.
std::string serialize_graph(const FrozenGraph& graph);
void rehash(FrozenGraph& graph);

/// Inference subgraph of the checkpoint's mean network. The value network
/// and log_std are not carried over.
FrozenGraph freeze(const Checkpoint& checkpoint);

struct OptimizeStats {
  std::size_t bytes_before = 0;
  std::size_t bytes_after = 0;
  std::size_t nodes_before = 0;
  std::size_t nodes_after = 0;
  std::size_t constants_before = 0;
  std::size_t constants_after = 0;
  std::size_t neurons_removed = 0;
  std::size_t outputs_stubbed = 0;
};

/// Semantics-preserving rewrite: bias-add fusion, input-scale folding,
/// removal of constant (zero-weight) and dead neurons, and constant stubs
/// for eliminated output rows. Runs to a fixpoint.
FrozenGraph optimize(const FrozenGraph& graph, OptimizeStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Binary weights file: 16-byte header {magic, version, obs_dim, act_dim},
// then a node table and float32 payload, all little-endian, row-major.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kBlobMagic = 0x42574c52;  // "RLWB"
inline constexpr std::uint32_t kBlobVersion = 1;

struct BlobHeader {
  std::uint32_t magic = kBlobMagic;
  std::uint32_t version = kBlobVersion;
  std::uint32_t obs_dim = 0;
  std::uint32_t act_dim = 0;
};

class BlobError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> write_weights_blob(const FrozenGraph& graph);
BlobHeader parse_blob_header(std::span<const std::uint8_t> bytes);
/// Rebuilds the graph from a blob. Constants come back float32-rounded.
FrozenGraph parse_weights_blob(std::span<const std::uint8_t> bytes);

struct EmittedArtifact {
  std::string symbol;
  std::string source;
  std::vector<std::uint8_t> weights_blob;
  std::size_t weight_constants = 0;
};

/// Freestanding C99 translation unit with static const float arrays and one
/// function `void <symbol>(const float in[N], float out[M])`. It only
/// includes <math.h>, for tanh.
EmittedArtifact emit_source(const FrozenGraph& graph, const std::string& symbol);

struct EquivalenceReport {
  std::size_t probes = 0;
  double max_abs_error = 0.0;
  double tolerance = 1e-6;
  std::vector<double> worst_probe;
  std::size_t worst_output = 0;
  bool passed = true;
  bool vacuous = false;  // no probes were run

  std::string summary() const;
};

/// Compares the graph, evaluated as the generated code would, against the
/// checkpoint's reference forward pass on uniform probes in [-range, range].
/// Probes are float32-representable so both sides see the same input.
EquivalenceReport verify_equivalence(const FrozenGraph& graph, const Checkpoint& checkpoint, std::size_t probes,
                                     std::uint64_t seed = 0, double tolerance = 1e-6, double range = 1000.0);

}  // namespace rotorlab
