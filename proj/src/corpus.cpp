#include "parg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace parg {

// ---------------------------------------------------------------- ontology

bool Ontology::has_domain(std::string_view domain) const {
  return domains.count(std::string(domain)) > 0;
}

bool Ontology::has_slot(std::string_view domain, std::string_view slot) const {
  auto it = slots.find(std::string(domain));
  return it != slots.end() && it->second.count(std::string(slot)) > 0;
}

bool Ontology::is_informable(std::string_view domain, std::string_view slot) const {
  auto it = slots.find(std::string(domain));
  if (it == slots.end()) return false;
  auto s = it->second.find(std::string(slot));
  return s != it->second.end() && s->second.informable;
}

bool Ontology::is_requestable(std::string_view domain, std::string_view slot) const {
  auto it = slots.find(std::string(domain));
  if (it == slots.end()) return false;
  auto s = it->second.find(std::string(slot));
  return s != it->second.end() && s->second.requestable;
}

bool Ontology::is_requestable_anywhere(std::string_view slot) const {
  for (const auto& [domain, specs] : slots) {
    auto s = specs.find(std::string(slot));
    if (s != specs.end() && s->second.requestable) return true;
  }
  return false;
}

std::set<std::string> Ontology::informable_slot_types() const {
  std::set<std::string> out;
  for (const auto& [domain, specs] : slots)
    for (const auto& [slot, spec] : specs)
      if (spec.informable) out.insert(slot);
  return out;
}

std::set<std::string> Ontology::slot_names() const {
  std::set<std::string> out;
  for (const auto& [domain, specs] : slots)
    for (const auto& [slot, spec] : specs) out.insert(slot);
  return out;
}

std::string Ontology::placeholder(std::string_view slot) {
  return "[" + std::string(slot) + "]";
}

std::optional<std::string> Ontology::placeholder_slot(std::string_view token) {
  if (token.size() < 3 || token.front() != '[' || token.back() != ']') return std::nullopt;
  return std::string(token.substr(1, token.size() - 2));
}

void Ontology::validate() const {
  for (const auto& [domain, specs] : slots) {
    if (!domains.count(domain)) throw SchemaError("ontology: slots listed for unknown domain '" + domain + "'");
    for (const auto& [slot, spec] : specs) {
      if (slot.empty()) throw SchemaError("ontology: empty slot name in domain '" + domain + "'");
      if (!spec.informable && !spec.requestable)
        throw SchemaError("ontology: slot '" + domain + "." + slot + "' is neither informable nor requestable");
    }
  }
  for (const auto& [key, vals] : values) {
    if (!has_slot(key.domain, key.slot))
      throw SchemaError("ontology: values listed for unknown slot '" + key.domain + "." + key.slot + "'");
    for (const auto& v : vals)
      if (v.empty()) throw SchemaError("ontology: empty value for slot '" + key.domain + "." + key.slot + "'");
  }
}

// ---------------------------------------------------------------- acts / belief

Tokens DialogAct::serialize() const {
  Tokens out{Ontology::placeholder(domain), Ontology::placeholder(act_type)};
  if (slot) out.push_back(*slot);
  return out;
}

std::string DialogAct::key() const { return slot ? act_type + "-" + *slot : act_type; }

Tokens serialize_acts(const std::vector<DialogAct>& acts) {
  std::vector<Tokens> parts;
  parts.reserve(acts.size());
  for (const auto& a : acts) parts.push_back(a.serialize());
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  Tokens out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Tokens BeliefState::serialize() const {
  Tokens out;
  for (const auto& [key, value] : informed) {
    out.push_back(Ontology::placeholder(key.domain));
    out.push_back(key.slot);
    for (auto& tok : tokenize(value)) out.push_back(std::move(tok));
    out.emplace_back(kEntryEndToken);
  }
  out.emplace_back(kSeparatorToken);
  for (const auto& key : requested) {
    out.push_back(Ontology::placeholder(key.domain));
    out.push_back(key.slot);
  }
  return out;
}

BeliefState BeliefState::parse(const Tokens& span) {
  BeliefState st;
  std::size_t i = 0;
  const std::size_t n = span.size();
  while (i < n && span[i] != kSeparatorToken) {
    auto domain = Ontology::placeholder_slot(span[i]);
    if (!domain || i + 1 >= n || span[i + 1] == kSeparatorToken || span[i + 1] == kEntryEndToken) {
      ++i;
      continue;
    }
    std::string slot = span[i + 1];
    std::size_t j = i + 2;
    Tokens value;
    while (j < n && span[j] != kEntryEndToken && span[j] != kSeparatorToken &&
           !Ontology::placeholder_slot(span[j])) {
      value.push_back(span[j]);
      ++j;
    }
    if (!value.empty()) st.informed[{*domain, slot}] = join(value);
    i = (j < n && span[j] == kEntryEndToken) ? j + 1 : j;
  }
  if (i < n) ++i;  // separator
  while (i + 1 < n) {
    auto domain = Ontology::placeholder_slot(span[i]);
    if (domain && !Ontology::placeholder_slot(span[i + 1])) {
      st.requested.insert({*domain, span[i + 1]});
      i += 2;
    } else {
      ++i;
    }
  }
  return st;
}

// ---------------------------------------------------------------- corpus

const Dialog* Corpus::find(std::string_view id) const {
  for (const auto& d : dialogs)
    if (d.id == id) return &d;
  return nullptr;
}

std::size_t Corpus::turn_count() const {
  std::size_t n = 0;
  for (const auto& d : dialogs) n += d.turns.size();
  return n;
}

// ---------------------------------------------------------------- tokenize

namespace {

bool is_placeholder_char(char c) {
  return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
         c == '_' || c == '-';
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char raw = text[i];
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
      continue;
    }
    if (raw == '[') {
      std::size_t j = i + 1;
      std::string inner;
      while (j < text.size() &&
             is_placeholder_char(static_cast<char>(std::tolower(static_cast<unsigned char>(text[j]))))) {
        inner += static_cast<char>(std::tolower(static_cast<unsigned char>(text[j])));
        ++j;
      }
      if (!inner.empty() && j < text.size() && text[j] == ']') {
        flush();
        out.push_back("[" + inner + "]");
        i = j;
        continue;
      }
    }
    if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, raw);
      continue;
    }
    cur += (c < 0x80) ? static_cast<char>(std::tolower(c)) : raw;
  }
  flush();
  return out;
}

// ---------------------------------------------------------------- delexicalize

namespace {

struct ValueEntry {
  Tokens tokens;
  std::string slot;
  std::string domain;
  int source = 1;  // 0 = belief state, 1 = ontology
};

class ValueIndex {
 public:
  void add(Tokens tokens, std::string slot, std::string domain, int source) {
    if (tokens.empty()) return;
    auto key = tokens.front();
    by_first_[key].push_back({std::move(tokens), std::move(slot), std::move(domain), source});
  }

  const std::vector<ValueEntry>* candidates(const std::string& first) const {
    auto it = by_first_.find(first);
    return it == by_first_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<std::string, std::vector<ValueEntry>> by_first_;
};

ValueIndex build_ontology_index(const Ontology& ontology) {
  ValueIndex index;
  for (const auto& [key, vals] : ontology.values)
    for (const auto& v : vals) index.add(tokenize(v), key.slot, key.domain, 1);
  return index;
}

DelexUtterance delexicalize_with(const Tokens& utterance, const ValueIndex& ontology_index,
                                 const BeliefState& state, std::string_view domain) {
  ValueIndex state_index;
  for (const auto& [key, value] : state.informed) state_index.add(tokenize(value), key.slot, key.domain, 0);

  DelexUtterance out;
  std::size_t i = 0;
  while (i < utterance.size()) {
    const ValueEntry* best = nullptr;
    auto better = [&](const ValueEntry& e) {
      if (!best) return true;
      if (e.tokens.size() != best->tokens.size()) return e.tokens.size() > best->tokens.size();
      if (e.source != best->source) return e.source < best->source;
      const bool e_dom = e.domain == domain, b_dom = best->domain == domain;
      if (e_dom != b_dom) return e_dom;
      return e.slot < best->slot;
    };
    auto scan = [&](const ValueIndex& index) {
      const auto* cands = index.candidates(utterance[i]);
      if (!cands) return;
      for (const auto& e : *cands) {
        if (i + e.tokens.size() > utterance.size()) continue;
        if (!std::equal(e.tokens.begin(), e.tokens.end(), utterance.begin() + static_cast<std::ptrdiff_t>(i)))
          continue;
        if (better(e)) best = &e;
      }
    };
    if (!Ontology::placeholder_slot(utterance[i])) {
      scan(state_index);
      scan(ontology_index);
    }
    if (best) {
      Binding b;
      b.position = out.tokens.size();
      b.slot = best->slot;
      b.surface.assign(utterance.begin() + static_cast<std::ptrdiff_t>(i),
                       utterance.begin() + static_cast<std::ptrdiff_t>(i + best->tokens.size()));
      out.tokens.push_back(Ontology::placeholder(best->slot));
      out.bindings.push_back(std::move(b));
      i += best->tokens.size();
    } else {
      out.tokens.push_back(utterance[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace

DelexUtterance delexicalize(const Tokens& utterance, const Ontology& ontology, const BeliefState& state,
                            std::string_view domain) {
  return delexicalize_with(utterance, build_ontology_index(ontology), state, domain);
}

Tokens relexicalize(const DelexUtterance& d) {
  Tokens out;
  out.reserve(d.tokens.size());
  std::size_t next = 0;
  for (std::size_t pos = 0; pos < d.tokens.size(); ++pos) {
    if (next < d.bindings.size() && d.bindings[next].position == pos) {
      const auto& b = d.bindings[next];
      if (d.tokens[pos] != Ontology::placeholder(b.slot))
        throw ValidationError("relexicalize: binding at position " + std::to_string(pos) + " expects [" + b.slot +
                              "] but found '" + d.tokens[pos] + "'");
      out.insert(out.end(), b.surface.begin(), b.surface.end());
      ++next;
    } else {
      out.push_back(d.tokens[pos]);
    }
  }
  if (next != d.bindings.size()) throw ValidationError("relexicalize: bindings out of order or out of range");
  return out;
}

void delexicalize_corpus(Corpus& corpus) {
  const ValueIndex index = build_ontology_index(corpus.ontology);
  auto apply = [&](Turn& turn) {
    turn.user_delex = delexicalize_with(turn.user, index, turn.state, turn.domain);
    turn.response_delex = delexicalize_with(turn.response, index, turn.state, turn.domain);
  };
  for (auto& d : corpus.dialogs)
    for (auto& t : d.turns) apply(t);
  for (auto& a : corpus.augmented) apply(a.turn);
}

// ---------------------------------------------------------------- split / subsample

Corpus restrict_to(const Corpus& corpus, const std::set<std::string>& ids) {
  Corpus out;
  out.ontology = corpus.ontology;
  out.database = corpus.database;
  out.out_of_ontology = corpus.out_of_ontology;
  for (const auto& d : corpus.dialogs)
    if (ids.count(d.id)) out.dialogs.push_back(d);
  for (const auto& a : corpus.augmented)
    if (ids.count(a.source_dialog)) out.augmented.push_back(a);
  return out;
}

namespace {

std::vector<std::string> shuffled_ids(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(corpus.dialogs.size());
  for (const auto& d : corpus.dialogs) ids.push_back(d.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ValidationError("corpus contains duplicate dialog ids");
  Rng rng(seed);
  rng.shuffle(ids);
  return ids;
}

}  // namespace

Split split(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = 0.0;
  int parts = 0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("split ratios must be finite and non-negative");
    sum += r;
    if (r > 0.0) ++parts;
  }
  if (sum <= 0.0) throw ValidationError("split ratios must not all be zero");
  const std::size_t n = corpus.dialogs.size();
  if (n < static_cast<std::size_t>(parts))
    throw ValidationError("cannot split " + std::to_string(n) + " dialogs into " + std::to_string(parts) + " parts");

  auto portion = [&](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * (r / sum) + 1e-9));
  };
  std::size_t n_dev = portion(ratios[1]);
  std::size_t n_test = portion(ratios[2]);
  // Non-empty parts keep at least one dialog.
  if (ratios[1] > 0 && n_dev == 0) n_dev = 1;
  if (ratios[2] > 0 && n_test == 0) n_test = 1;
  if (ratios[0] > 0 && n_dev + n_test >= n) {
    if (n_dev > 1) --n_dev;
    else if (n_test > 1) --n_test;
  }
  std::size_t n_train = n - n_dev - n_test;

  const auto ids = shuffled_ids(corpus, seed);
  std::set<std::string> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::set<std::string> dev_ids(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                                ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  std::set<std::string> test_ids(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), ids.end());
  return {restrict_to(corpus, train_ids), restrict_to(corpus, dev_ids), restrict_to(corpus, test_ids)};
}

Corpus subsample(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ValidationError("subsample fraction must lie in (0, 1], got " + std::to_string(fraction));
  const std::size_t n = corpus.dialogs.size();
  const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * fraction - 1e-9));
  const auto ids = shuffled_ids(corpus, seed);
  return restrict_to(corpus, std::set<std::string>(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k)));
}

std::vector<const Entity*> query_database(const std::vector<Entity>& database, std::string_view domain,
                                          const std::map<SlotKey, std::string>& constraints) {
  std::vector<const Entity*> out;
  for (const auto& e : database) {
    if (e.domain != domain) continue;
    bool ok = true;
    for (const auto& [key, value] : constraints) {
      if (key.domain != domain || value == "dontcare") continue;
      auto it = e.fields.find(key.slot);
      if (it == e.fields.end() || it->second != value) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(&e);
  }
  return out;
}

}  // namespace parg
