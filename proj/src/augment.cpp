#include "parg/augment.hpp"

#include <algorithm>

#include "parg/log.hpp"

namespace parg {

using nlohmann::json;

std::string to_string(FilterReason r) {
  switch (r) {
    case FilterReason::ok: return "ok";
    case FilterReason::missing_slot: return "missing_slot";
    case FilterReason::low_bleu: return "low_bleu";
    case FilterReason::low_diversity: return "low_diversity";
  }
  return "?";
}

namespace {

std::map<std::string, int> placeholder_counts(const Tokens& tokens) {
  std::map<std::string, int> counts;
  for (const auto& t : tokens)
    if (Ontology::placeholder_slot(t)) ++counts[t];
  return counts;
}

std::optional<DelexUtterance> rebind(const DelexUtterance& paraphrase, const DelexUtterance& original) {
  std::map<std::string, std::vector<const Binding*>> by_slot;
  for (const auto& b : original.bindings) by_slot[b.slot].push_back(&b);
  std::map<std::string, std::size_t> used;
  DelexUtterance out;
  out.tokens = paraphrase.tokens;
  for (std::size_t pos = 0; pos < paraphrase.tokens.size(); ++pos) {
    auto slot = Ontology::placeholder_slot(paraphrase.tokens[pos]);
    if (!slot) continue;
    auto it = by_slot.find(*slot);
    if (it == by_slot.end()) return std::nullopt;
    std::size_t k = std::min(used[*slot]++, it->second.size() - 1);
    out.bindings.push_back({pos, *slot, it->second[k]->surface});
  }
  return out;
}

}  // namespace

FilterVerdict filter_generated(const DelexUtterance& original, const DelexUtterance& candidate,
                               const MiningConfig& cfg) {
  FilterVerdict v;
  const auto need = placeholder_counts(original.tokens);
  const auto have = placeholder_counts(candidate.tokens);
  for (const auto& [ph, n] : need) {
    auto it = have.find(ph);
    if (it == have.end() || it->second < n) {
      v.reason = FilterReason::missing_slot;
      return v;
    }
  }
  if (original.tokens.empty() || candidate.tokens.empty()) {
    v.reason = FilterReason::low_bleu;
    return v;
  }
  v.bleu = sentence_bleu(candidate.tokens, original.tokens, cfg.bleu);
  v.diversity = cfg.diversity_metric(original, candidate);
  if (v.bleu < cfg.bleu_threshold) {
    v.reason = FilterReason::low_bleu;
  } else if (v.diversity < cfg.diversity_threshold) {
    v.reason = FilterReason::low_diversity;
  } else {
    v.pass = true;
    v.reason = FilterReason::ok;
  }
  return v;
}

json instance_to_json(const TrainingInstance& inst) {
  json j = {{"dialog", inst.ref.dialog},
            {"turn", inst.ref.turn},
            {"context", join(inst.context)},
            {"prev_belief", join(inst.prev_belief)},
            {"user_input", join(inst.user_input)},
            {"source_user", join(inst.source_user)},
            {"target_act", join(inst.target_act)},
            {"target_belief", join(inst.target_belief)},
            {"target_response", join(inst.target_response)},
            {"db_bucket", inst.db_bucket},
            {"is_paraphrase", inst.is_paraphrase}};
  j["target_paraphrase"] = inst.target_paraphrase ? json(join(*inst.target_paraphrase)) : json(nullptr);
  return j;
}

TargetTable select_targets(const Corpus& corpus, const std::vector<ParaphrasePair>& pairs, std::size_t max_targets) {
  const TurnTable turns(corpus);
  std::map<TurnRef, std::vector<const ParaphrasePair*>> by_src;
  for (const auto& p : pairs) by_src[p.src].push_back(&p);
  TargetTable table;
  for (auto& [src, list] : by_src) {
    std::stable_sort(list.begin(), list.end(), [](const ParaphrasePair* a, const ParaphrasePair* b) {
      if (a->relaxed != b->relaxed) return !a->relaxed;
      if (a->diversity != b->diversity) return a->diversity > b->diversity;
      return a->tgt < b->tgt;
    });
    auto& out = table[src];
    for (const auto* p : list) {
      if (out.size() >= max_targets) break;
      out.push_back(turns.at(p->tgt).user_delex);
    }
  }
  return table;
}

std::optional<Tokens> relexicalize_with(const DelexUtterance& paraphrase, const DelexUtterance& original) {
  auto bound = rebind(paraphrase, original);
  if (!bound) return std::nullopt;
  return relexicalize(*bound);
}

int db_bucket(const Corpus& corpus, const Turn& turn) {
  const auto matches = query_database(corpus.database, turn.domain, turn.state.informed);
  return matches.empty() ? 0 : (matches.size() == 1 ? 1 : 2);
}

TrainingInstance make_instance(const Corpus& corpus, const Dialog& dialog, int t, const TargetTable* targets) {
  const Turn& turn = dialog.turn(t);
  TrainingInstance inst;
  inst.ref = {dialog.id, t};
  if (t > 1) {
    const Turn& prev = dialog.turn(t - 1);
    inst.context = prev.response_delex.tokens;
    inst.prev_belief = prev.state.serialize();
    inst.target_act = serialize_acts(prev.sys_acts);
  } else {
    inst.prev_belief = BeliefState{}.serialize();
  }
  inst.user_input = turn.user;
  inst.source_user = turn.user_delex.tokens;
  if (targets) {
    auto it = targets->find(inst.ref);
    if (it != targets->end() && !it->second.empty()) inst.target_paraphrase = it->second.front().tokens;
  }
  inst.target_belief = turn.state.serialize();
  inst.target_response = turn.response_delex.tokens;
  inst.db_bucket = db_bucket(corpus, turn);
  return inst;
}

UtterSubResult utter_sub(const Corpus& corpus, const std::vector<ParaphrasePair>& pairs, std::size_t max_targets) {
  UtterSubResult result;
  result.corpus = corpus;
  const TurnTable turns(corpus);
  const auto table = select_targets(corpus, pairs, max_targets);
  for (const auto& [ref, targets] : table) {
    const Turn& original = turns.at(ref);
    for (const auto& target : targets) {
      auto bound = rebind(target, original.user_delex);
      if (!bound) {
        ++result.skipped;
        logger().warn("utter-sub: paraphrase for {}#{} has a placeholder without a value in the original; skipped",
                      ref.dialog, ref.turn);
        continue;
      }
      AugmentedTurn aug{ref.dialog, original};
      aug.turn.user = relexicalize(*bound);
      aug.turn.user_delex = std::move(*bound);
      result.corpus.augmented.push_back(std::move(aug));
      ++result.added;
    }
  }
  return result;
}

std::vector<TrainingInstance> build_instances(const Corpus& corpus, const TargetTable& targets, ParaphraseSource source,
                                              std::uint64_t epoch_seed, const MiningConfig& cfg,
                                              const ParaphraseGenerator& generator, InstanceStats* stats) {
  struct Item {
    const Dialog* dialog;
    int t;
    const AugmentedTurn* augmented;
  };
  std::vector<Item> items;
  for (const auto& d : corpus.dialogs)
    for (int t = 1; t <= static_cast<int>(d.turns.size()); ++t) items.push_back({&d, t, nullptr});
  for (const auto& a : corpus.augmented) {
    const Dialog* d = corpus.find(a.source_dialog);
    if (!d) throw ValidationError("augmented turn refers to unknown dialog '" + a.source_dialog + "'");
    items.push_back({d, a.turn.index, &a});
  }
  Rng rng(epoch_seed);
  rng.shuffle(items);

  InstanceStats local;
  std::vector<TrainingInstance> out;
  out.reserve(items.size() * 2);
  for (const auto& item : items) {
    TrainingInstance inst = make_instance(corpus, *item.dialog, item.t, &targets);
    ++local.turns;
    if (item.augmented) {
      inst.user_input = item.augmented->turn.user;
      inst.is_paraphrase = true;
      out.push_back(std::move(inst));
      ++local.paraphrase_instances;
      continue;
    }
    std::optional<Tokens> candidate;
    if (source == ParaphraseSource::mined) {
      auto it = targets.find(inst.ref);
      if (it != targets.end() && !it->second.empty()) candidate = it->second.front().tokens;
    } else if (generator) {
      candidate = generator(inst);
    }
    const Turn& turn = item.dialog->turn(item.t);
    out.push_back(inst);
    if (!candidate) continue;
    const DelexUtterance cand{*candidate, {}};
    if (!filter_generated(turn.user_delex, cand, cfg).pass) {
      ++local.filtered;
      continue;
    }
    auto relexed = relexicalize_with(cand, turn.user_delex);
    if (!relexed) {
      ++local.unrelexicalizable;
      continue;
    }
    TrainingInstance sibling = std::move(inst);
    sibling.user_input = std::move(*relexed);
    sibling.is_paraphrase = true;
    out.push_back(std::move(sibling));
    ++local.paraphrase_instances;
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace parg
