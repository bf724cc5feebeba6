#include "parg/neural/config.hpp"

#include "parg/common.hpp"

namespace parg::neural {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ValidationError(std::string("model config: ") + name + " must be positive");
  };
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(max_encoder_len, "max_encoder_len");
  positive(max_act_len, "max_act_len");
  positive(max_paraphrase_len, "max_paraphrase_len");
  positive(max_belief_len, "max_belief_len");
  positive(max_response_len, "max_response_len");
  positive(lr_halve_patience, "lr_halve_patience");
  positive(early_stop_patience, "early_stop_patience");
  positive(batch_size, "batch_size");
  positive(max_epochs, "max_epochs");
  positive(threads, "threads");
  if (vocab_size < 0) throw ValidationError("model config: vocab_size must be non-negative");
  if (!(learning_rate > 0.0)) throw ValidationError("model config: learning_rate must be positive");
  if (!(init_scale > 0.0)) throw ValidationError("model config: init_scale must be positive");
  if (!(grad_clip > 0.0)) throw ValidationError("model config: grad_clip must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ValidationError("model config: Adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ValidationError("model config: adam_epsilon must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"vocab_size", c.vocab_size},
                     {"max_encoder_len", c.max_encoder_len},
                     {"max_act_len", c.max_act_len},
                     {"max_paraphrase_len", c.max_paraphrase_len},
                     {"max_belief_len", c.max_belief_len},
                     {"max_response_len", c.max_response_len},
                     {"learning_rate", c.learning_rate},
                     {"lr_halve_patience", c.lr_halve_patience},
                     {"early_stop_patience", c.early_stop_patience},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_epsilon", c.adam_epsilon},
                     {"init_scale", c.init_scale},
                     {"seed", c.seed},
                     {"batch_size", c.batch_size},
                     {"grad_clip", c.grad_clip},
                     {"max_epochs", c.max_epochs},
                     {"paraphrase_model", c.paraphrase_model},
                     {"action_attention", c.action_attention},
                     {"paraphrase_attention", c.paraphrase_attention},
                     {"input_feeding", c.input_feeding},
                     {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.max_encoder_len = j.value("max_encoder_len", d.max_encoder_len);
  c.max_act_len = j.value("max_act_len", d.max_act_len);
  c.max_paraphrase_len = j.value("max_paraphrase_len", d.max_paraphrase_len);
  c.max_belief_len = j.value("max_belief_len", d.max_belief_len);
  c.max_response_len = j.value("max_response_len", d.max_response_len);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.lr_halve_patience = j.value("lr_halve_patience", d.lr_halve_patience);
  c.early_stop_patience = j.value("early_stop_patience", d.early_stop_patience);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
  c.init_scale = j.value("init_scale", d.init_scale);
  c.seed = j.value("seed", d.seed);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.paraphrase_model = j.value("paraphrase_model", d.paraphrase_model);
  c.action_attention = j.value("action_attention", d.action_attention);
  c.paraphrase_attention = j.value("paraphrase_attention", d.paraphrase_attention);
  c.input_feeding = j.value("input_feeding", d.input_feeding);
  c.threads = j.value("threads", d.threads);
}

}  // namespace parg::neural
