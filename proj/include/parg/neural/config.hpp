#pragma once

#include <cstdint>

#include <json.hpp>

namespace parg::neural {

struct ModelConfig {
  int embed_dim = 50;
  int hidden_dim = 50;
  /// Filled in from the vocabulary when the model is created.
  int vocab_size = 0;

  int max_encoder_len = 80;
  int max_act_len = 12;
  int max_paraphrase_len = 24;
  int max_belief_len = 32;
  int max_response_len = 32;

  double learning_rate = 0.003;
  int lr_halve_patience = 3;
  int early_stop_patience = 5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double init_scale = 0.08;
  std::uint64_t seed = 1;
  int batch_size = 32;
  double grad_clip = 5.0;
  int max_epochs = 50;

  /// Action and paraphrase decoders (off for the plain response model).
  bool paraphrase_model = true;
  /// Paraphrase decoder attends over the action decoder states.
  bool action_attention = true;
  /// Belief decoder attends over the paraphrase decoder states (joint training).
  bool paraphrase_attention = true;
  /// Each decoder step also reads the previous step's encoder attention context.
  bool input_feeding = true;

  /// Worker threads for batch gradients; 1 runs the serial kernel.
  int threads = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace parg::neural
