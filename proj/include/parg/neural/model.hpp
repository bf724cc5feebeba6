#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "parg/augment.hpp"
#include "parg/neural/config.hpp"
#include "parg/neural/params.hpp"
#include "parg/neural/vocab.hpp"

namespace parg::neural {

/// Encoder input with its copy extension: source tokens missing from the
/// vocabulary get ids vocab_size, vocab_size + 1, ... so they can be copied.
struct Source {
  std::vector<int> ids;       // embedding ids (UNK for out-of-vocabulary)
  std::vector<int> extended;  // copy ids
  std::vector<std::string> oov;
  int vocab_size = 0;

  int extended_size() const { return vocab_size + static_cast<int>(oov.size()); }
  int extended_id(const std::string& token, const Vocab& vocab) const;
  std::string token(int extended_id, const Vocab& vocab) const;
};

Source make_source(const Tokens& tokens, const Vocab& vocab);

struct EncodedInstance {
  Source paraphrase_source;  // R_{t-1} <sep> U_t (delexicalized)
  Source response_source;    // R_{t-1} <sep> U_t' <sep> B_{t-1}
  std::vector<int> action;     // targets, extended ids, EOS-terminated
  std::vector<int> paraphrase;
  std::vector<int> belief;
  std::vector<int> response;
  /// False when the paraphrase decoder is teacher-forced on the original
  /// utterance with its loss masked out.
  bool has_paraphrase_target = false;
  int db_bucket = 0;
};

/// Joins segments with the separator and drops leading tokens beyond
/// `max_len`. Returns how many tokens were dropped.
std::size_t build_encoder_input(const std::vector<const Tokens*>& segments, int max_len, Tokens& out);

EncodedInstance encode_instance(const Vocab& vocab, const TrainingInstance& inst, const ModelConfig& cfg);

struct GruStep {
  std::vector<double> x, h_prev, z, r, n, h;
};

struct EncoderTrace {
  std::vector<int> ids;
  std::vector<GruStep> forward, backward;  // backward[i] reads token i
  std::vector<double> memory;              // n x 2H, [forward_i; backward_i]
  std::vector<double> summary;             // [forward_last; backward_first]
  int length() const { return static_cast<int>(ids.size()); }
};

struct AttentionStep {
  std::vector<double> act;    // n x A, tanh activations
  std::vector<double> alpha;  // n
  std::vector<double> context;
};

struct DecoderStep {
  int input = Vocab::kBos;
  int target = -1;  // extended id, -1 when decoding freely
  GruStep cell;
  std::vector<AttentionStep> attention;
  std::vector<double> features;  // [s; contexts]
  std::vector<double> vocab_probs;
  double gate = 0.0;
  double target_prob = 0.0;
};

struct DecoderTrace {
  std::vector<double> init_input;  // 2H
  std::vector<double> init_state;  // H
  std::vector<std::vector<double>> memories;     // per site, n x M
  std::vector<int> memory_lengths;
  std::vector<std::vector<double>> projections;  // per site, n x A
  std::vector<double> extra;                     // database one-hot
  std::vector<DecoderStep> steps;
  std::vector<double> hidden;                    // T x H
  std::vector<int> output;                       // emitted extended ids

  int length() const { return static_cast<int>(steps.size()); }
};

struct DecoderLoss {
  double nll = 0.0;
  int tokens = 0;
};

struct ForwardPass {
  EncoderTrace paraphrase_encoder;
  EncoderTrace response_encoder;
  DecoderTrace action;
  DecoderTrace paraphrase;
  DecoderTrace belief;
  DecoderTrace response;
  std::array<DecoderLoss, 4> loss{};  // action, paraphrase, belief, response
};

/// Per-decoder multipliers on the summed token NLL; zero removes a loss term.
struct LossScales {
  double action = 1.0;
  double paraphrase = 1.0;
  double belief = 1.0;
  double response = 1.0;
};

enum class GenerateMode { paraphrase, belief, response, full_turn };

struct GenerateInput {
  Tokens context;      // R_{t-1}, delexicalized
  Tokens prev_belief;  // serialized B_{t-1}
  Tokens user;         // surface U_t
  Tokens user_delex;   // delexicalized U_t
  int db_bucket = 0;
};

struct Generation {
  Tokens action;
  Tokens paraphrase;
  Tokens belief;
  Tokens response;
  int db_bucket = 0;
};

/// Maps a decoded belief span to a database bucket (0, 1, 2).
using DbLookup = std::function<int(const Tokens& belief_span)>;

/// The joint paraphrase + response network.
class Model {
 public:
  Model(ModelConfig cfg, Vocab vocab);
  Model(ModelConfig cfg, Vocab vocab, std::vector<double> params);

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  EncoderTrace encode(const EncoderRefs& encoder, const Source& src) const;

  /// Runs one decoder. With `teacher`, inputs are the gold prefix; without,
  /// greedy decoding up to `max_len` steps or EOS.
  DecoderTrace decode(const DecoderRefs& decoder, const EncoderTrace& encoder,
                      const std::vector<const DecoderTrace*>& other_memories, const Source& copy_source,
                      std::span<const double> extra, const std::vector<int>* teacher, int max_len) const;

  /// Teacher-forced pass over all decoders.
  ForwardPass forward(const EncodedInstance& inst) const;

  /// Adds d(sum_k scale_k * nll_k)/d(params) into `grad`.
  void backward(const ForwardPass& fp, const EncodedInstance& inst, const LossScales& scales,
                std::span<double> grad) const;

  Generation generate(const GenerateInput& input, GenerateMode mode, const DbLookup& db = {}) const;

  /// Full mixture distribution over the extended vocabulary for one step.
  std::vector<double> distribution(const DecoderStep& step, const Source& copy_source) const;
  /// Copy component (1 - gate) * attention mass per extended id.
  std::vector<double> copy_distribution(const DecoderStep& step, const Source& copy_source) const;

 private:
  ModelConfig cfg_;
  Vocab vocab_;
  ParamLayout layout_;
  std::vector<double> params_;
};

std::vector<double> db_one_hot(int bucket);

}  // namespace parg::neural
