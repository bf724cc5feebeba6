#include "parg/neural/params.hpp"

#include "parg/common.hpp"

namespace parg::neural {

int DecoderRefs::output_dim() const {
  int d = cell.hidden;
  for (const auto& s : sites) d += s.memory_dim;
  return d;
}

TensorRef ParamLayout::add(const std::string& name, int rows, int cols) {
  TensorRef t{size_, rows, cols};
  size_ += t.size();
  tensors_.push_back({name, t});
  return t;
}

GruRefs ParamLayout::add_gru(const std::string& name, int in, int hidden) {
  GruRefs g;
  g.in = in;
  g.hidden = hidden;
  g.w = add(name + ".w", 3 * hidden, in);
  g.u = add(name + ".u", 3 * hidden, hidden);
  g.b = add(name + ".b", 3 * hidden, 1);
  return g;
}

DecoderRefs ParamLayout::add_decoder(const std::string& name, DecoderKind kind, const ModelConfig& cfg,
                                     const std::vector<std::pair<MemoryKind, int>>& memories, int extra_input) {
  const int h = cfg.hidden_dim;
  DecoderRefs d;
  d.kind = kind;
  d.extra_input = extra_input;
  d.init_w = add(name + ".init_w", h, 2 * h);
  d.init_b = add(name + ".init_b", h, 1);
  const int feed = cfg.input_feeding ? memories.front().second : 0;
  d.feed_input = feed;
  d.cell = add_gru(name + ".cell", cfg.embed_dim + extra_input + feed, h);
  for (std::size_t k = 0; k < memories.size(); ++k) {
    const auto& [mkind, mdim] = memories[k];
    const std::string site = name + ".attn" + std::to_string(k);
    AttentionRefs a;
    a.memory_dim = mdim;
    a.wm = add(site + ".wm", h, mdim);
    a.ws = add(site + ".ws", h, h);
    a.v = add(site + ".v", h, 1);
    d.sites.push_back(a);
    d.site_kinds.push_back(mkind);
  }
  d.out_w = add(name + ".out_w", cfg.vocab_size, d.output_dim());
  d.out_b = add(name + ".out_b", cfg.vocab_size, 1);
  d.gate_w = add(name + ".gate_w", 1, d.output_dim());
  d.gate_b = add(name + ".gate_b", 1, 1);
  return d;
}

ParamLayout::ParamLayout(const ModelConfig& cfg) {
  cfg.validate();
  if (cfg.vocab_size < 5) throw ValidationError("model config: vocab_size must cover the reserved tokens");
  const int e = cfg.embed_dim, h = cfg.hidden_dim;
  embedding = add("embedding", cfg.vocab_size, e);
  if (cfg.paraphrase_model) {
    paraphrase_encoder = {add_gru("para_enc.fwd", e, h), add_gru("para_enc.bwd", e, h)};
    action = add_decoder("action", DecoderKind::action, cfg, {{MemoryKind::encoder, 2 * h}}, 0);
    std::vector<std::pair<MemoryKind, int>> mem{{MemoryKind::encoder, 2 * h}};
    if (cfg.action_attention) mem.emplace_back(MemoryKind::action_states, h);
    paraphrase = add_decoder("paraphrase", DecoderKind::paraphrase, cfg, mem, 0);
  }
  response_encoder = {add_gru("resp_enc.fwd", e, h), add_gru("resp_enc.bwd", e, h)};
  std::vector<std::pair<MemoryKind, int>> bmem{{MemoryKind::encoder, 2 * h}};
  if (cfg.paraphrase_model && cfg.paraphrase_attention) bmem.emplace_back(MemoryKind::paraphrase_states, h);
  belief = add_decoder("belief", DecoderKind::belief, cfg, bmem, 0);
  response = add_decoder("response", DecoderKind::response, cfg,
                         {{MemoryKind::encoder, 2 * h}, {MemoryKind::belief_states, h}}, kDbBuckets);
}

std::string ParamLayout::describe(std::size_t i) const {
  for (const auto& t : tensors_) {
    if (i >= t.ref.offset && i < t.ref.offset + t.ref.size()) {
      const std::size_t local = i - t.ref.offset;
      return t.name + "[" + std::to_string(local / static_cast<std::size_t>(t.ref.cols)) + "," +
             std::to_string(local % static_cast<std::size_t>(t.ref.cols)) + "]";
    }
  }
  return "?";
}

std::vector<double> init_params(const ParamLayout& layout, const ModelConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0x1417));
  std::vector<double> p(layout.size());
  for (auto& x : p) x = rng.uniform(-cfg.init_scale, cfg.init_scale);
  return p;
}

}  // namespace parg::neural
