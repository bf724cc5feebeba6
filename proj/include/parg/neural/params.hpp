#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "parg/neural/config.hpp"

namespace parg::neural {

/// Location of one tensor inside the flat parameter vector (row-major).
struct TensorRef {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Gated recurrent cell; gate rows are stacked update, reset, candidate.
struct GruRefs {
  TensorRef w;  // 3H x in
  TensorRef u;  // 3H x H
  TensorRef b;  // 3H
  int in = 0;
  int hidden = 0;
};

/// Additive attention: score_i = v . tanh(Wm m_i + Ws s).
struct AttentionRefs {
  TensorRef wm;  // A x M
  TensorRef ws;  // A x H
  TensorRef v;   // A
  int memory_dim = 0;
};

struct EncoderRefs {
  GruRefs forward;
  GruRefs backward;
};

enum class DecoderKind { action, paraphrase, belief, response };
enum class MemoryKind { encoder, action_states, paraphrase_states, belief_states };

struct DecoderRefs {
  DecoderKind kind = DecoderKind::action;
  TensorRef init_w;  // H x 2H
  TensorRef init_b;  // H
  GruRefs cell;
  std::vector<AttentionRefs> sites;  // site 0 is the encoder (copy source)
  std::vector<MemoryKind> site_kinds;
  TensorRef out_w;   // V x (H + sum memory dims)
  TensorRef out_b;   // V
  TensorRef gate_w;  // 1 x (H + sum memory dims)
  TensorRef gate_b;  // 1
  int extra_input = 0;  // database one-hot width
  int feed_input = 0;   // previous encoder context width (input feeding)
  int output_dim() const;
};

inline constexpr int kDbBuckets = 3;

struct NamedTensor {
  std::string name;
  TensorRef ref;
};

/// Shapes and flat offsets of every trainable tensor, in a stable order.
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelConfig& cfg);

  std::size_t size() const { return size_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  /// Name of the tensor holding flat index `i` (for diagnostics).
  std::string describe(std::size_t i) const;

  TensorRef embedding;
  EncoderRefs paraphrase_encoder;
  EncoderRefs response_encoder;
  DecoderRefs action;
  DecoderRefs paraphrase;
  DecoderRefs belief;
  DecoderRefs response;

 private:
  TensorRef add(const std::string& name, int rows, int cols);
  GruRefs add_gru(const std::string& name, int in, int hidden);
  DecoderRefs add_decoder(const std::string& name, DecoderKind kind, const ModelConfig& cfg,
                          const std::vector<std::pair<MemoryKind, int>>& memories, int extra_input);

  std::vector<NamedTensor> tensors_;
  std::size_t size_ = 0;
};

/// Uniform(-scale, scale) initialization from the config seed.
std::vector<double> init_params(const ParamLayout& layout, const ModelConfig& cfg);

inline std::span<const double> view(std::span<const double> flat, const TensorRef& t) {
  return flat.subspan(t.offset, t.size());
}
inline std::span<double> view(std::span<double> flat, const TensorRef& t) { return flat.subspan(t.offset, t.size()); }

}  // namespace parg::neural
