#include "parg/mining.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <omp.h>

namespace parg {

using nlohmann::json;

std::string DialogFunction::to_string() const {
  return "(" + domain + ", {" + join(slots, ",") + "}, [" + join(prev_acts, ",") + "])";
}

void MiningConfig::validate() const {
  if (!(bleu_threshold >= 0.0) || !(diversity_threshold >= 0.0) || !(relax_floor >= 0.0))
    throw ValidationError("mining thresholds must be non-negative");
  if (!(relax_step > 0.0)) throw ValidationError("relax_step must be positive");
  if (!diversity_metric) throw ValidationError("mining config has no diversity metric");
  bleu.validate();
}

DialogFunction extract_dialog_function(const Dialog& dialog, int t, const Ontology& ontology, bool include_requested) {
  if (t < 1 || t > static_cast<int>(dialog.turns.size()))
    throw ValidationError("turn index " + std::to_string(t) + " out of range for dialog '" + dialog.id + "'");
  const Turn& turn = dialog.turn(t);
  DialogFunction df;
  df.domain = turn.domain;

  std::set<std::string> slots;
  for (const auto& tok : turn.user_delex.tokens) {
    auto slot = Ontology::placeholder_slot(tok);
    if (slot && ontology.has_slot(turn.domain, *slot)) slots.insert(*slot);
  }
  if (include_requested) {
    const std::set<SlotKey>* before = t > 1 ? &dialog.turn(t - 1).state.requested : nullptr;
    for (const auto& key : turn.state.requested) {
      if (key.domain != turn.domain) continue;
      if (before && before->count(key)) continue;
      slots.insert(key.slot);
    }
  }
  df.slots.assign(slots.begin(), slots.end());

  if (t > 1) {
    std::set<std::string> acts;
    for (const auto& a : dialog.turn(t - 1).sys_acts) acts.insert(a.key());
    df.prev_acts.assign(acts.begin(), acts.end());
  }
  return df;
}

FunctionIndex index_by_function(const Corpus& corpus, bool include_requested) {
  FunctionIndex index;
  std::vector<const Dialog*> dialogs;
  for (const auto& d : corpus.dialogs) dialogs.push_back(&d);
  std::sort(dialogs.begin(), dialogs.end(), [](const Dialog* a, const Dialog* b) { return a->id < b->id; });
  for (const Dialog* d : dialogs)
    for (int t = 1; t <= static_cast<int>(d->turns.size()); ++t)
      index[extract_dialog_function(*d, t, corpus.ontology, include_requested)].push_back({d->id, t});
  return index;
}

TurnTable::TurnTable(const Corpus& corpus) {
  for (const auto& d : corpus.dialogs)
    for (const auto& t : d.turns) turns_[{d.id, t.index}] = &t;
}

const Turn& TurnTable::at(const TurnRef& ref) const {
  auto it = turns_.find(ref);
  if (it == turns_.end())
    throw ValidationError("unknown turn " + ref.dialog + "#" + std::to_string(ref.turn));
  return *it->second;
}

namespace {

struct Scored {
  double bleu;
  double diversity;
};

std::optional<Scored> score(const Turn& original, const Turn& candidate, const MiningConfig& cfg) {
  if (original.user_delex.tokens.empty() || candidate.user_delex.tokens.empty()) return std::nullopt;
  return Scored{sentence_bleu(candidate.user_delex.tokens, original.user_delex.tokens, cfg.bleu),
                cfg.diversity_metric(original.user_delex, candidate.user_delex)};
}

void sort_pairs(std::vector<ParaphrasePair>& pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const ParaphrasePair& a, const ParaphrasePair& b) {
    return std::tie(a.src, a.tgt) < std::tie(b.src, b.tgt);
  });
}

}  // namespace

std::vector<ParaphrasePair> mine_bucket(const DialogFunction& function, const std::vector<TurnRef>& bucket,
                                        const TurnTable& turns, const MiningConfig& cfg) {
  std::vector<ParaphrasePair> out;
  for (const auto& u : bucket) {
    const Turn& tu = turns.at(u);
    for (const auto& v : bucket) {
      if (u == v) continue;
      auto s = score(tu, turns.at(v), cfg);
      if (!s) continue;
      if (s->bleu >= cfg.bleu_threshold && s->diversity >= cfg.diversity_threshold)
        out.push_back({u, v, function, s->bleu, s->diversity, false});
    }
  }
  return out;
}

namespace serial {

std::vector<ParaphrasePair> mine_pairs(const Corpus& corpus, const MiningConfig& cfg) {
  cfg.validate();
  const TurnTable turns(corpus);
  std::vector<ParaphrasePair> out;
  for (const auto& [function, bucket] : index_by_function(corpus, cfg.include_requested_slots)) {
    auto mined = mine_bucket(function, bucket, turns, cfg);
    out.insert(out.end(), mined.begin(), mined.end());
  }
  sort_pairs(out);
  return out;
}

}  // namespace serial

namespace parallel {

std::vector<ParaphrasePair> mine_pairs(const Corpus& corpus, const MiningConfig& cfg, int threads) {
  cfg.validate();
  const TurnTable turns(corpus);
  const auto index = index_by_function(corpus, cfg.include_requested_slots);
  std::vector<const FunctionIndex::value_type*> buckets;
  buckets.reserve(index.size());
  for (const auto& entry : index) buckets.push_back(&entry);

  std::vector<std::vector<ParaphrasePair>> results(buckets.size());
  const int n = static_cast<int>(buckets.size());
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (int i = 0; i < n; ++i) results[i] = mine_bucket(buckets[i]->first, buckets[i]->second, turns, cfg);

  std::vector<ParaphrasePair> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  sort_pairs(out);
  return out;
}

}  // namespace parallel

std::vector<ParaphrasePair> mine_pairs(const Corpus& corpus, const MiningConfig& cfg) {
  return parallel::mine_pairs(corpus, cfg);
}

Relaxation relax_for_orphans(const Corpus& corpus, const std::vector<ParaphrasePair>& pairs, const MiningConfig& cfg) {
  cfg.validate();
  const TurnTable turns(corpus);
  std::set<TurnRef> covered;
  for (const auto& p : pairs) covered.insert(p.src);

  Relaxation result;
  for (const auto& [function, bucket] : index_by_function(corpus, cfg.include_requested_slots)) {
    for (const auto& u : bucket) {
      if (covered.count(u)) continue;
      if (bucket.size() == 1) {
        result.orphans.push_back(u);
        continue;
      }
      const Turn& tu = turns.at(u);
      std::vector<std::pair<TurnRef, Scored>> candidates;
      for (const auto& v : bucket) {
        if (v == u) continue;
        if (auto s = score(tu, turns.at(v), cfg)) candidates.emplace_back(v, *s);
      }
      double threshold = cfg.diversity_threshold;
      bool admitted = false;
      while (threshold > cfg.relax_floor) {
        threshold = std::max(threshold - cfg.relax_step, cfg.relax_floor);
        const std::pair<TurnRef, Scored>* best = nullptr;
        for (const auto& c : candidates) {
          if (c.second.bleu < cfg.bleu_threshold || c.second.diversity < threshold) continue;
          if (!best || c.second.diversity > best->second.diversity) best = &c;
        }
        if (best) {
          result.added.push_back({u, best->first, function, best->second.bleu, best->second.diversity, true});
          admitted = true;
          break;
        }
      }
      if (!admitted && cfg.bleu_fallback && !candidates.empty()) {
        const std::pair<TurnRef, Scored>* best = nullptr;
        for (const auto& c : candidates) {
          if (!best || c.second.bleu > best->second.bleu ||
              (c.second.bleu == best->second.bleu && c.second.diversity > best->second.diversity))
            best = &c;
        }
        result.added.push_back({u, best->first, function, best->second.bleu, best->second.diversity, true});
        result.bleu_fallback.push_back(u);
        admitted = true;
      }
      if (!admitted) result.unresolved.push_back(u);
    }
  }
  sort_pairs(result.added);
  return result;
}

json orphan_report(const Relaxation& relaxation, const Corpus& corpus, bool include_requested) {
  auto describe = [&](const TurnRef& r) {
    const Dialog* d = corpus.find(r.dialog);
    json j = {{"dialog", r.dialog}, {"turn", r.turn}};
    if (d) j["function"] = extract_dialog_function(*d, r.turn, corpus.ontology, include_requested).to_string();
    return j;
  };
  json orphans = json::array(), fallback = json::array(), unresolved = json::array();
  for (const auto& r : relaxation.orphans) orphans.push_back(describe(r));
  for (const auto& r : relaxation.bleu_fallback) fallback.push_back(describe(r));
  for (const auto& r : relaxation.unresolved) unresolved.push_back(describe(r));
  return {{"relaxed_pairs", relaxation.added.size()},
          {"orphans", orphans},
          {"bleu_fallback", fallback},
          {"unresolved", unresolved}};
}

json pair_to_json(const ParaphrasePair& p) {
  return {{"src", {{"dialog", p.src.dialog}, {"turn", p.src.turn}}},
          {"tgt", {{"dialog", p.tgt.dialog}, {"turn", p.tgt.turn}}},
          {"function", {{"domain", p.function.domain}, {"slots", p.function.slots}, {"prev_acts", p.function.prev_acts}}},
          {"bleu", p.bleu},
          {"diversity", p.diversity},
          {"relaxed", p.relaxed}};
}

ParaphrasePair pair_from_json(const json& j) {
  ParaphrasePair p;
  p.src = {j.at("src").at("dialog").get<std::string>(), j.at("src").at("turn").get<int>()};
  p.tgt = {j.at("tgt").at("dialog").get<std::string>(), j.at("tgt").at("turn").get<int>()};
  const auto& f = j.at("function");
  p.function.domain = f.at("domain").get<std::string>();
  p.function.slots = f.at("slots").get<std::vector<std::string>>();
  p.function.prev_acts = f.at("prev_acts").get<std::vector<std::string>>();
  p.bleu = j.at("bleu").get<double>();
  p.diversity = j.at("diversity").get<double>();
  p.relaxed = j.at("relaxed").get<bool>();
  return p;
}

void export_pairs(const std::vector<ParaphrasePair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write pairs file '" + path.string() + "'");
  for (const auto& p : pairs) out << pair_to_json(p).dump() << '\n';
}

std::vector<ParaphrasePair> import_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open pairs file '" + path.string() + "'");
  std::vector<ParaphrasePair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      pairs.push_back(pair_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw SchemaError("pairs file '" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

}  // namespace parg
