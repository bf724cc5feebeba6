#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "parg/augment.hpp"
#include "parg/corpus.hpp"

namespace parg::neural {

/// Dense token ids. Ids 0..4 are PAD, UNK, BOS, EOS and the separator,
/// followed by every slot placeholder of the ontology, then the remaining
/// training tokens in lexicographic order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSep = 4;

  Vocab() = default;

  static Vocab build(const std::vector<TrainingInstance>& instances, const Ontology& ontology);
  /// Restores a vocabulary from its id-ordered token list.
  static Vocab from_tokens(std::vector<std::string> tokens, int reserved);

  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  /// Count of reserved ids (specials plus placeholders).
  int reserved() const { return reserved_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int reserved_ = 0;
};

}  // namespace parg::neural
