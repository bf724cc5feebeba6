#include "parg/neural/model.hpp"

#include <cmath>

#include "kernels.hpp"
#include "parg/log.hpp"

namespace parg::neural {

using namespace kernels;

// ---------------------------------------------------------------- inputs

int Source::extended_id(const std::string& token, const Vocab& vocab) const {
  if (vocab.contains(token)) return vocab.id(token);
  for (std::size_t k = 0; k < oov.size(); ++k)
    if (oov[k] == token) return vocab_size + static_cast<int>(k);
  return Vocab::kUnk;
}

std::string Source::token(int extended_id, const Vocab& vocab) const {
  if (extended_id < vocab_size) return vocab.token(extended_id);
  return oov.at(static_cast<std::size_t>(extended_id - vocab_size));
}

Source make_source(const Tokens& tokens, const Vocab& vocab) {
  Source s;
  s.vocab_size = vocab.size();
  for (const auto& t : tokens) {
    if (vocab.contains(t)) {
      const int id = vocab.id(t);
      s.ids.push_back(id);
      s.extended.push_back(id);
      continue;
    }
    s.ids.push_back(Vocab::kUnk);
    auto it = std::find(s.oov.begin(), s.oov.end(), t);
    if (it == s.oov.end()) {
      s.oov.push_back(t);
      s.extended.push_back(s.vocab_size + static_cast<int>(s.oov.size()) - 1);
    } else {
      s.extended.push_back(s.vocab_size + static_cast<int>(it - s.oov.begin()));
    }
  }
  return s;
}

std::size_t build_encoder_input(const std::vector<const Tokens*>& segments, int max_len, Tokens& out) {
  out.clear();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out.emplace_back(kSeparatorToken);
    out.insert(out.end(), segments[i]->begin(), segments[i]->end());
  }
  const auto limit = static_cast<std::size_t>(max_len);
  if (out.size() <= limit) return 0;
  const std::size_t dropped = out.size() - limit;
  out.erase(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(dropped));
  return dropped;
}

namespace {

std::vector<int> encode_target(const Tokens& tokens, const Source& src, const Vocab& vocab, int max_len) {
  std::vector<int> out;
  const std::size_t keep = std::min(tokens.size(), static_cast<std::size_t>(std::max(max_len - 1, 0)));
  for (std::size_t i = 0; i < keep; ++i) out.push_back(src.extended_id(tokens[i], vocab));
  out.push_back(Vocab::kEos);
  return out;
}

}  // namespace

EncodedInstance encode_instance(const Vocab& vocab, const TrainingInstance& inst, const ModelConfig& cfg) {
  EncodedInstance e;
  Tokens seq;
  if (build_encoder_input({&inst.context, &inst.source_user}, cfg.max_encoder_len, seq))
    logger().warn("paraphrase encoder input for {}#{} truncated to {} tokens", inst.ref.dialog, inst.ref.turn,
                  cfg.max_encoder_len);
  e.paraphrase_source = make_source(seq, vocab);
  if (build_encoder_input({&inst.context, &inst.user_input, &inst.prev_belief}, cfg.max_encoder_len, seq))
    logger().warn("response encoder input for {}#{} truncated to {} tokens", inst.ref.dialog, inst.ref.turn,
                  cfg.max_encoder_len);
  e.response_source = make_source(seq, vocab);
  if (cfg.paraphrase_model) {
    e.action = encode_target(inst.target_act, e.paraphrase_source, vocab, cfg.max_act_len);
    e.has_paraphrase_target = inst.target_paraphrase.has_value();
    e.paraphrase = encode_target(e.has_paraphrase_target ? *inst.target_paraphrase : inst.source_user,
                                 e.paraphrase_source, vocab, cfg.max_paraphrase_len);
  }
  e.belief = encode_target(inst.target_belief, e.response_source, vocab, cfg.max_belief_len);
  e.response = encode_target(inst.target_response, e.response_source, vocab, cfg.max_response_len);
  e.db_bucket = inst.db_bucket;
  return e;
}

std::vector<double> db_one_hot(int bucket) {
  std::vector<double> v(kDbBuckets, 0.0);
  v[static_cast<std::size_t>(std::clamp(bucket, 0, kDbBuckets - 1))] = 1.0;
  return v;
}

// ---------------------------------------------------------------- cells

namespace {

void gru_forward(const double* P, const GruRefs& g, const double* x, const double* h, GruStep& s) {
  const int H = g.hidden, In = g.in;
  s.x.assign(x, x + In);
  s.h_prev.assign(h, h + H);
  std::vector<double> ax(P + g.b.offset, P + g.b.offset + 3 * H);
  gemv_acc(ax.data(), P + g.w.offset, x, 3 * H, In);
  std::vector<double> ah(2 * static_cast<std::size_t>(H), 0.0);
  gemv_acc(ah.data(), P + g.u.offset, h, 2 * H, H);
  s.z.resize(H);
  s.r.resize(H);
  s.n.resize(H);
  s.h.resize(H);
  std::vector<double> rh(H);
  for (int i = 0; i < H; ++i) {
    s.z[i] = sigmoid(ax[i] + ah[i]);
    s.r[i] = sigmoid(ax[H + i] + ah[H + i]);
    rh[i] = s.r[i] * h[i];
  }
  std::vector<double> an(ax.begin() + 2 * H, ax.end());
  gemv_acc(an.data(), P + g.u.offset + static_cast<std::size_t>(2 * H) * H, rh.data(), H, H);
  for (int i = 0; i < H; ++i) {
    s.n[i] = std::tanh(an[i]);
    s.h[i] = (1.0 - s.z[i]) * s.n[i] + s.z[i] * h[i];
  }
}

// dx accumulates; dh_prev is overwritten.
void gru_backward(const double* P, double* G, const GruRefs& g, const GruStep& s, const double* dh, double* dx,
                  double* dh_prev) {
  const int H = g.hidden, In = g.in;
  std::vector<double> da(3 * static_cast<std::size_t>(H));
  std::vector<double> rh(H), dr(H);
  for (int i = 0; i < H; ++i) {
    dh_prev[i] = dh[i] * s.z[i];
    const double dz = dh[i] * (s.h_prev[i] - s.n[i]);
    const double dn = dh[i] * (1.0 - s.z[i]);
    da[i] = dz * s.z[i] * (1.0 - s.z[i]);
    da[2 * H + i] = dn * (1.0 - s.n[i] * s.n[i]);
    rh[i] = s.r[i] * s.h_prev[i];
  }
  const double* un = P + g.u.offset + static_cast<std::size_t>(2 * H) * H;
  double* gun = G + g.u.offset + static_cast<std::size_t>(2 * H) * H;
  ger_acc(gun, da.data() + 2 * H, rh.data(), H, H);
  std::vector<double> drh(H, 0.0);
  gemv_t_acc(drh.data(), un, da.data() + 2 * H, H, H);
  for (int i = 0; i < H; ++i) {
    dr[i] = drh[i] * s.h_prev[i];
    dh_prev[i] += drh[i] * s.r[i];
    da[H + i] = dr[i] * s.r[i] * (1.0 - s.r[i]);
  }
  ger_acc(G + g.w.offset, da.data(), s.x.data(), 3 * H, In);
  for (int i = 0; i < 3 * H; ++i) G[g.b.offset + i] += da[i];
  ger_acc(G + g.u.offset, da.data(), s.h_prev.data(), 2 * H, H);
  gemv_t_acc(dh_prev, P + g.u.offset, da.data(), 2 * H, H);
  gemv_t_acc(dx, P + g.w.offset, da.data(), 3 * H, In);
}

const double* embedding_row(const double* P, const TensorRef& emb, int id) {
  return P + emb.offset + static_cast<std::size_t>(id) * emb.cols;
}

struct DecoderGrad {
  std::vector<double> d_init_input;
  std::vector<std::vector<double>> d_memories;
};

double copy_mass(const DecoderStep& step, const Source& src, int id) {
  double c = 0.0;
  const auto& alpha = step.attention[0].alpha;
  for (std::size_t i = 0; i < src.extended.size(); ++i)
    if (src.extended[i] == id) c += alpha[i];
  return c;
}

DecoderGrad backward_decoder(const double* P, double* G, const ModelConfig& cfg, const TensorRef& emb,
                             const DecoderRefs& d, const DecoderTrace& tr, const Source& src, double scale,
                             const std::vector<double>* d_hidden) {
  const int H = cfg.hidden_dim, E = cfg.embed_dim, V = cfg.vocab_size;
  const int od = d.output_dim();
  const int T = tr.length();
  const std::size_t nsites = d.sites.size();

  DecoderGrad out;
  out.d_memories.resize(nsites);
  std::vector<std::vector<double>> d_proj(nsites);
  for (std::size_t k = 0; k < nsites; ++k) {
    out.d_memories[k].assign(tr.memories[k].size(), 0.0);
    d_proj[k].assign(tr.projections[k].size(), 0.0);
  }

  std::vector<double> ds_next(H, 0.0), ds(H), dfeat(od), dz(V), dq(H), dx(d.cell.in);
  std::vector<double> d_feed(static_cast<std::size_t>(d.feed_input), 0.0);
  for (int t = T - 1; t >= 0; --t) {
    const DecoderStep& step = tr.steps[static_cast<std::size_t>(t)];
    ds = ds_next;
    if (d_hidden && !d_hidden->empty())
      for (int i = 0; i < H; ++i) ds[i] += (*d_hidden)[static_cast<std::size_t>(t) * H + i];

    std::fill(dfeat.begin(), dfeat.end(), 0.0);
    const int y = step.target;
    const double g = step.gate;
    const double dpy = scale != 0.0 ? -scale / step.target_prob : 0.0;
    if (scale != 0.0) {
      const double cy = copy_mass(step, src, y);
      const double pvy = y < V ? step.vocab_probs[static_cast<std::size_t>(y)] : 0.0;
      const double du = dpy * (pvy - cy) * g * (1.0 - g);
      if (y < V) {
        const double dpv = dpy * g;
        for (int j = 0; j < V; ++j) dz[j] = dpv * step.vocab_probs[j] * ((j == y ? 1.0 : 0.0) - pvy);
        ger_acc(G + d.out_w.offset, dz.data(), step.features.data(), V, od);
        for (int j = 0; j < V; ++j) G[d.out_b.offset + j] += dz[j];
        gemv_t_acc(dfeat.data(), P + d.out_w.offset, dz.data(), V, od);
      }
      for (int j = 0; j < od; ++j) {
        G[d.gate_w.offset + j] += du * step.features[j];
        dfeat[j] += P[d.gate_w.offset + j] * du;
      }
      G[d.gate_b.offset] += du;
    }
    // Gradient reaching this step's encoder context through the next step's input.
    for (int m = 0; m < d.feed_input; ++m) dfeat[static_cast<std::size_t>(H + m)] += d_feed[static_cast<std::size_t>(m)];
    for (int i = 0; i < H; ++i) ds[i] += dfeat[i];

    int off = H;
    for (std::size_t k = 0; k < nsites; ++k) {
      const auto& site = d.sites[k];
      const auto& att = step.attention[k];
      const int M = site.memory_dim;
      const int n = tr.memory_lengths[k];
      const double* mem = tr.memories[k].data();
      const double* dctx = dfeat.data() + off;
      off += M;
      const bool copy_term = k == 0 && scale != 0.0;
      if (!copy_term && std::all_of(dctx, dctx + M, [](double v) { return v == 0.0; })) continue;
      std::vector<double> dalpha(n);
      for (int i = 0; i < n; ++i) {
        dalpha[i] = dot(dctx, mem + static_cast<std::size_t>(i) * M, M);
        if (copy_term && src.extended[static_cast<std::size_t>(i)] == y) dalpha[i] += dpy * (1.0 - g);
        double* dm = out.d_memories[k].data() + static_cast<std::size_t>(i) * M;
        for (int m = 0; m < M; ++m) dm[m] += att.alpha[i] * dctx[m];
      }
      double sum = 0.0;
      for (int i = 0; i < n; ++i) sum += att.alpha[i] * dalpha[i];
      std::fill(dq.begin(), dq.end(), 0.0);
      const double* v = P + site.v.offset;
      double* gv = G + site.v.offset;
      for (int i = 0; i < n; ++i) {
        const double de = att.alpha[i] * (dalpha[i] - sum);
        if (de == 0.0) continue;
        const double* a = att.act.data() + static_cast<std::size_t>(i) * H;
        double* dp = d_proj[k].data() + static_cast<std::size_t>(i) * H;
        for (int j = 0; j < H; ++j) {
          gv[j] += de * a[j];
          const double dpre = de * v[j] * (1.0 - a[j] * a[j]);
          dp[j] += dpre;
          dq[j] += dpre;
        }
      }
      ger_acc(G + site.ws.offset, dq.data(), step.cell.h.data(), H, H);
      gemv_t_acc(ds.data(), P + site.ws.offset, dq.data(), H, H);
    }

    std::fill(dx.begin(), dx.end(), 0.0);
    gru_backward(P, G, d.cell, step.cell, ds.data(), dx.data(), ds_next.data());
    double* gemb = G + emb.offset + static_cast<std::size_t>(step.input) * E;
    for (int i = 0; i < E; ++i) gemb[i] += dx[i];
    for (int m = 0; m < d.feed_input; ++m)
      d_feed[static_cast<std::size_t>(m)] = dx[static_cast<std::size_t>(E + d.extra_input + m)];
  }

  std::vector<double> dpre(H);
  for (int i = 0; i < H; ++i) dpre[i] = ds_next[i] * (1.0 - tr.init_state[i] * tr.init_state[i]);
  ger_acc(G + d.init_w.offset, dpre.data(), tr.init_input.data(), H, 2 * H);
  for (int i = 0; i < H; ++i) G[d.init_b.offset + i] += dpre[i];
  out.d_init_input.assign(2 * static_cast<std::size_t>(H), 0.0);
  gemv_t_acc(out.d_init_input.data(), P + d.init_w.offset, dpre.data(), H, 2 * H);

  for (std::size_t k = 0; k < nsites; ++k) {
    const int M = d.sites[k].memory_dim;
    const int n = tr.memory_lengths[k];
    for (int i = 0; i < n; ++i) {
      const double* dp = d_proj[k].data() + static_cast<std::size_t>(i) * H;
      const double* m = tr.memories[k].data() + static_cast<std::size_t>(i) * M;
      ger_acc(G + d.sites[k].wm.offset, dp, m, H, M);
      gemv_t_acc(out.d_memories[k].data() + static_cast<std::size_t>(i) * M, P + d.sites[k].wm.offset, dp, H, M);
    }
  }
  return out;
}

void backward_encoder(const double* P, double* G, const ModelConfig& cfg, const TensorRef& emb,
                      const EncoderRefs& enc, const EncoderTrace& tr, const std::vector<double>& d_memory,
                      const std::vector<double>& d_summary) {
  const int H = cfg.hidden_dim, E = cfg.embed_dim;
  const int n = tr.length();
  std::vector<double> dh(H), dh_prev(H), dx(E);
  for (int i = 0; i < H; ++i) dh[i] = d_summary[i];
  for (int t = n - 1; t >= 0; --t) {
    for (int i = 0; i < H; ++i) dh[i] += d_memory[static_cast<std::size_t>(t) * 2 * H + i];
    std::fill(dx.begin(), dx.end(), 0.0);
    gru_backward(P, G, enc.forward, tr.forward[static_cast<std::size_t>(t)], dh.data(), dx.data(), dh_prev.data());
    double* g = G + emb.offset + static_cast<std::size_t>(tr.ids[static_cast<std::size_t>(t)]) * E;
    for (int i = 0; i < E; ++i) g[i] += dx[i];
    dh.swap(dh_prev);
  }
  for (int i = 0; i < H; ++i) dh[i] = d_summary[H + i];
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < H; ++i) dh[i] += d_memory[static_cast<std::size_t>(t) * 2 * H + H + i];
    std::fill(dx.begin(), dx.end(), 0.0);
    gru_backward(P, G, enc.backward, tr.backward[static_cast<std::size_t>(t)], dh.data(), dx.data(), dh_prev.data());
    double* g = G + emb.offset + static_cast<std::size_t>(tr.ids[static_cast<std::size_t>(t)]) * E;
    for (int i = 0; i < E; ++i) g[i] += dx[i];
    dh.swap(dh_prev);
  }
}

void add_into(std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Tokens strip_eos(const std::vector<int>& ids, const Source& src, const Vocab& vocab) {
  Tokens out;
  for (int id : ids) {
    if (id == Vocab::kEos) break;
    out.push_back(src.token(id, vocab));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- model

Model::Model(ModelConfig cfg, Vocab vocab) : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  cfg_.vocab_size = vocab_.size();
  layout_ = ParamLayout(cfg_);
  params_ = init_params(layout_, cfg_);
}

Model::Model(ModelConfig cfg, Vocab vocab, std::vector<double> params)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), params_(std::move(params)) {
  if (cfg_.vocab_size != vocab_.size())
    throw ValidationError("model config vocab_size " + std::to_string(cfg_.vocab_size) + " does not match vocabulary size " +
                          std::to_string(vocab_.size()));
  layout_ = ParamLayout(cfg_);
  if (params_.size() != layout_.size())
    throw ValidationError("parameter vector has " + std::to_string(params_.size()) + " entries, layout expects " +
                          std::to_string(layout_.size()));
}

EncoderTrace Model::encode(const EncoderRefs& encoder, const Source& src) const {
  const double* P = params_.data();
  const int H = cfg_.hidden_dim;
  EncoderTrace tr;
  tr.ids = src.ids;
  const int n = tr.length();
  if (n == 0) throw ValidationError("encoder input is empty");
  tr.forward.resize(static_cast<std::size_t>(n));
  tr.backward.resize(static_cast<std::size_t>(n));
  tr.memory.assign(static_cast<std::size_t>(n) * 2 * H, 0.0);
  std::vector<double> h(H, 0.0);
  for (int t = 0; t < n; ++t) {
    auto& st = tr.forward[static_cast<std::size_t>(t)];
    gru_forward(P, encoder.forward, embedding_row(P, layout_.embedding, tr.ids[t]), h.data(), st);
    h = st.h;
    std::copy(h.begin(), h.end(), tr.memory.begin() + static_cast<std::ptrdiff_t>(t) * 2 * H);
  }
  std::fill(h.begin(), h.end(), 0.0);
  for (int t = n - 1; t >= 0; --t) {
    auto& st = tr.backward[static_cast<std::size_t>(t)];
    gru_forward(P, encoder.backward, embedding_row(P, layout_.embedding, tr.ids[t]), h.data(), st);
    h = st.h;
    std::copy(h.begin(), h.end(), tr.memory.begin() + static_cast<std::ptrdiff_t>(t) * 2 * H + H);
  }
  tr.summary = tr.forward.back().h;
  tr.summary.insert(tr.summary.end(), tr.backward.front().h.begin(), tr.backward.front().h.end());
  return tr;
}

DecoderTrace Model::decode(const DecoderRefs& d, const EncoderTrace& encoder,
                           const std::vector<const DecoderTrace*>& other_memories, const Source& src,
                           std::span<const double> extra, const std::vector<int>* teacher, int max_len) const {
  const double* P = params_.data();
  const int H = cfg_.hidden_dim, E = cfg_.embed_dim, V = cfg_.vocab_size;
  const int od = d.output_dim();
  if (other_memories.size() + 1 != d.sites.size())
    throw ValidationError("decoder expects " + std::to_string(d.sites.size() - 1) + " decoder memories");
  if (static_cast<int>(extra.size()) != d.extra_input) throw ValidationError("decoder extra input has wrong width");

  DecoderTrace tr;
  tr.init_input = encoder.summary;
  tr.init_state.assign(P + d.init_b.offset, P + d.init_b.offset + H);
  gemv_acc(tr.init_state.data(), P + d.init_w.offset, tr.init_input.data(), H, 2 * H);
  for (auto& v : tr.init_state) v = std::tanh(v);

  tr.memories.push_back(encoder.memory);
  tr.memory_lengths.push_back(encoder.length());
  for (const auto* other : other_memories) {
    tr.memories.push_back(other->hidden);
    tr.memory_lengths.push_back(other->length());
  }
  for (std::size_t k = 0; k < d.sites.size(); ++k) {
    const int M = d.sites[k].memory_dim, n = tr.memory_lengths[k];
    std::vector<double> proj(static_cast<std::size_t>(n) * H, 0.0);
    for (int i = 0; i < n; ++i)
      gemv_acc(proj.data() + static_cast<std::size_t>(i) * H, P + d.sites[k].wm.offset,
               tr.memories[k].data() + static_cast<std::size_t>(i) * M, H, M);
    tr.projections.push_back(std::move(proj));
  }
  tr.extra.assign(extra.begin(), extra.end());

  const int steps = teacher ? static_cast<int>(teacher->size()) : max_len;
  std::vector<double> s = tr.init_state, x(static_cast<std::size_t>(d.cell.in), 0.0), q(H);
  int input = Vocab::kBos;
  for (int t = 0; t < steps; ++t) {
    DecoderStep step;
    step.input = input;
    const double* e = embedding_row(P, layout_.embedding, input);
    std::copy(e, e + E, x.begin());
    std::copy(extra.begin(), extra.end(), x.begin() + E);
    if (d.feed_input && t > 0) {
      const auto& prev = tr.steps.back().attention[0].context;
      std::copy(prev.begin(), prev.end(), x.begin() + E + d.extra_input);
    }
    gru_forward(P, d.cell, x.data(), s.data(), step.cell);
    s = step.cell.h;

    step.features = s;
    step.attention.resize(d.sites.size());
    for (std::size_t k = 0; k < d.sites.size(); ++k) {
      const auto& site = d.sites[k];
      const int M = site.memory_dim, n = tr.memory_lengths[k];
      auto& att = step.attention[k];
      std::fill(q.begin(), q.end(), 0.0);
      gemv_acc(q.data(), P + site.ws.offset, s.data(), H, H);
      att.act.resize(static_cast<std::size_t>(n) * H);
      att.alpha.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const double* pr = tr.projections[k].data() + static_cast<std::size_t>(i) * H;
        double* a = att.act.data() + static_cast<std::size_t>(i) * H;
        for (int j = 0; j < H; ++j) a[j] = std::tanh(pr[j] + q[j]);
        att.alpha[i] = dot(P + site.v.offset, a, H);
      }
      softmax(att.alpha.data(), n);
      att.context.assign(static_cast<std::size_t>(M), 0.0);
      for (int i = 0; i < n; ++i) {
        const double* m = tr.memories[k].data() + static_cast<std::size_t>(i) * M;
        for (int j = 0; j < M; ++j) att.context[j] += att.alpha[i] * m[j];
      }
      step.features.insert(step.features.end(), att.context.begin(), att.context.end());
    }

    step.vocab_probs.assign(P + d.out_b.offset, P + d.out_b.offset + V);
    gemv_acc(step.vocab_probs.data(), P + d.out_w.offset, step.features.data(), V, od);
    softmax(step.vocab_probs.data(), V);
    step.gate = sigmoid(dot(P + d.gate_w.offset, step.features.data(), od) + P[d.gate_b.offset]);

    int next;
    if (teacher) {
      step.target = (*teacher)[static_cast<std::size_t>(t)];
      const double pv = step.target < V ? step.vocab_probs[static_cast<std::size_t>(step.target)] : 0.0;
      step.target_prob = step.gate * pv + (1.0 - step.gate) * copy_mass(step, src, step.target);
      next = step.target;
    } else {
      const auto dist = distribution(step, src);
      next = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      step.target_prob = dist[static_cast<std::size_t>(next)];
    }
    tr.output.push_back(next);
    tr.hidden.insert(tr.hidden.end(), s.begin(), s.end());
    tr.steps.push_back(std::move(step));
    if (!teacher && next == Vocab::kEos) break;
    input = next < V ? next : Vocab::kUnk;
  }
  return tr;
}

ForwardPass Model::forward(const EncodedInstance& inst) const {
  ForwardPass fp;
  auto nll = [](const DecoderTrace& tr) {
    DecoderLoss l;
    for (const auto& s : tr.steps) l.nll -= std::log(s.target_prob);
    l.tokens = tr.length();
    return l;
  };
  if (cfg_.paraphrase_model) {
    fp.paraphrase_encoder = encode(layout_.paraphrase_encoder, inst.paraphrase_source);
    fp.action = decode(layout_.action, fp.paraphrase_encoder, {}, inst.paraphrase_source, {}, &inst.action, 0);
    std::vector<const DecoderTrace*> mem;
    if (cfg_.action_attention) mem.push_back(&fp.action);
    fp.paraphrase = decode(layout_.paraphrase, fp.paraphrase_encoder, mem, inst.paraphrase_source, {},
                           &inst.paraphrase, 0);
    fp.loss[0] = nll(fp.action);
    if (inst.has_paraphrase_target) fp.loss[1] = nll(fp.paraphrase);
  }
  fp.response_encoder = encode(layout_.response_encoder, inst.response_source);
  std::vector<const DecoderTrace*> bmem;
  if (cfg_.paraphrase_model && cfg_.paraphrase_attention) bmem.push_back(&fp.paraphrase);
  fp.belief = decode(layout_.belief, fp.response_encoder, bmem, inst.response_source, {}, &inst.belief, 0);
  const auto db = db_one_hot(inst.db_bucket);
  fp.response = decode(layout_.response, fp.response_encoder, {&fp.belief}, inst.response_source, db,
                       &inst.response, 0);
  fp.loss[2] = nll(fp.belief);
  fp.loss[3] = nll(fp.response);
  return fp;
}

void Model::backward(const ForwardPass& fp, const EncodedInstance& inst, const LossScales& scales,
                     std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ValidationError("gradient buffer has the wrong size");
  const double* P = params_.data();
  double* G = grad.data();
  const auto& L = layout_;

  auto resp = backward_decoder(P, G, cfg_, L.embedding, L.response, fp.response, inst.response_source,
                               scales.response, nullptr);
  auto belief = backward_decoder(P, G, cfg_, L.embedding, L.belief, fp.belief, inst.response_source, scales.belief,
                                 &resp.d_memories[1]);
  add_into(resp.d_memories[0], belief.d_memories[0]);
  add_into(resp.d_init_input, belief.d_init_input);
  backward_encoder(P, G, cfg_, L.embedding, L.response_encoder, fp.response_encoder, resp.d_memories[0],
                   resp.d_init_input);

  if (!cfg_.paraphrase_model) return;
  const std::vector<double>* d_para_hidden = cfg_.paraphrase_attention ? &belief.d_memories[1] : nullptr;
  const double para_scale = inst.has_paraphrase_target ? scales.paraphrase : 0.0;
  auto para = backward_decoder(P, G, cfg_, L.embedding, L.paraphrase, fp.paraphrase, inst.paraphrase_source,
                               para_scale, d_para_hidden);
  const std::vector<double>* d_act_hidden = cfg_.action_attention ? &para.d_memories[1] : nullptr;
  auto act = backward_decoder(P, G, cfg_, L.embedding, L.action, fp.action, inst.paraphrase_source, scales.action,
                              d_act_hidden);
  add_into(para.d_memories[0], act.d_memories[0]);
  add_into(para.d_init_input, act.d_init_input);
  backward_encoder(P, G, cfg_, L.embedding, L.paraphrase_encoder, fp.paraphrase_encoder, para.d_memories[0],
                   para.d_init_input);
}

std::vector<double> Model::distribution(const DecoderStep& step, const Source& src) const {
  std::vector<double> dist(static_cast<std::size_t>(src.extended_size()), 0.0);
  for (std::size_t j = 0; j < step.vocab_probs.size(); ++j) dist[j] = step.gate * step.vocab_probs[j];
  const auto& alpha = step.attention[0].alpha;
  for (std::size_t i = 0; i < src.extended.size(); ++i)
    dist[static_cast<std::size_t>(src.extended[i])] += (1.0 - step.gate) * alpha[i];
  return dist;
}

std::vector<double> Model::copy_distribution(const DecoderStep& step, const Source& src) const {
  std::vector<double> dist(static_cast<std::size_t>(src.extended_size()), 0.0);
  const auto& alpha = step.attention[0].alpha;
  for (std::size_t i = 0; i < src.extended.size(); ++i)
    dist[static_cast<std::size_t>(src.extended[i])] += (1.0 - step.gate) * alpha[i];
  return dist;
}

Generation Model::generate(const GenerateInput& input, GenerateMode mode, const DbLookup& db) const {
  Generation gen;
  Tokens seq;
  build_encoder_input({&input.context, &input.user_delex}, cfg_.max_encoder_len, seq);
  const Source para_src = make_source(seq, vocab_);
  build_encoder_input({&input.context, &input.user, &input.prev_belief}, cfg_.max_encoder_len, seq);
  const Source resp_src = make_source(seq, vocab_);

  DecoderTrace act, para;
  if (cfg_.paraphrase_model) {
    const auto enc = encode(layout_.paraphrase_encoder, para_src);
    act = decode(layout_.action, enc, {}, para_src, {}, nullptr, cfg_.max_act_len);
    std::vector<const DecoderTrace*> mem;
    if (cfg_.action_attention) mem.push_back(&act);
    para = decode(layout_.paraphrase, enc, mem, para_src, {}, nullptr, cfg_.max_paraphrase_len);
    gen.action = strip_eos(act.output, para_src, vocab_);
    gen.paraphrase = strip_eos(para.output, para_src, vocab_);
  }
  if (mode == GenerateMode::paraphrase) return gen;

  const auto enc = encode(layout_.response_encoder, resp_src);
  std::vector<const DecoderTrace*> bmem;
  if (cfg_.paraphrase_model && cfg_.paraphrase_attention) bmem.push_back(&para);
  const auto belief = decode(layout_.belief, enc, bmem, resp_src, {}, nullptr, cfg_.max_belief_len);
  gen.belief = strip_eos(belief.output, resp_src, vocab_);
  if (mode == GenerateMode::belief) return gen;

  gen.db_bucket = (mode == GenerateMode::full_turn && db) ? db(gen.belief) : input.db_bucket;
  const auto onehot = db_one_hot(gen.db_bucket);
  const auto resp = decode(layout_.response, enc, {&belief}, resp_src, onehot, nullptr, cfg_.max_response_len);
  gen.response = strip_eos(resp.output, resp_src, vocab_);
  return gen;
}

}  // namespace parg::neural
