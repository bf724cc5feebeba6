#include "parg/neural/vocab.hpp"

#include <set>

namespace parg::neural {

Vocab Vocab::build(const std::vector<TrainingInstance>& instances, const Ontology& ontology) {
  std::vector<std::string> tokens{"<pad>", "<unk>", "<bos>", "<eos>", std::string(kSeparatorToken)};
  std::set<std::string> reserved(tokens.begin(), tokens.end());
  for (const auto& slot : ontology.slot_names()) {
    auto ph = Ontology::placeholder(slot);
    if (reserved.insert(ph).second) tokens.push_back(ph);
  }
  const int n_reserved = static_cast<int>(tokens.size());

  std::set<std::string> seen;
  auto add = [&](const Tokens& seq) {
    for (const auto& t : seq)
      if (!reserved.count(t)) seen.insert(t);
  };
  for (const auto& inst : instances) {
    add(inst.context);
    add(inst.prev_belief);
    add(inst.user_input);
    add(inst.source_user);
    add(inst.target_act);
    if (inst.target_paraphrase) add(*inst.target_paraphrase);
    add(inst.target_belief);
    add(inst.target_response);
  }
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return from_tokens(std::move(tokens), n_reserved);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens, int reserved) {
  if (tokens.size() < 5 || tokens[kPad] != "<pad>" || tokens[kUnk] != "<unk>" || tokens[kBos] != "<bos>" ||
      tokens[kEos] != "<eos>" || tokens[kSep] != kSeparatorToken)
    throw SchemaError("vocabulary does not start with the reserved tokens");
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.reserved_ = reserved;
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second)
      throw SchemaError("vocabulary token '" + v.tokens_[i] + "' appears twice");
  }
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

}  // namespace parg::neural
