#include <doctest.h>

#include "parg/augment.hpp"
#include "support.hpp"

using namespace parg;

namespace {

DelexUtterance du(const char* s) { return {tokenize(s), {}}; }

std::vector<ParaphrasePair> mined_pairs(const Corpus& c) {
  auto pairs = serial::mine_pairs(c, MiningConfig{});
  const auto rel = relax_for_orphans(c, pairs, MiningConfig{});
  pairs.insert(pairs.end(), rel.added.begin(), rel.added.end());
  return pairs;
}

}  // namespace

TEST_CASE("filter reports the first failing check") {
  MiningConfig cfg;
  const auto orig = du("i want [food] food in the [area]");
  auto v = filter_generated(orig, du("i want [food] food"), cfg);
  CHECK_FALSE(v.pass);
  CHECK(v.reason == FilterReason::missing_slot);
  v = filter_generated(orig, du("[area] [food] , nothing else matters here"), cfg);
  CHECK(v.reason == FilterReason::low_bleu);
  v = filter_generated(orig, du("i want [food] food in the [area] please"), cfg);
  CHECK(v.reason == FilterReason::low_diversity);
  CHECK(v.diversity == 1.0);
  v = filter_generated(orig, du("could i get [food] food in the [area] part of town"), cfg);
  CHECK(v.pass);
  CHECK(v.reason == FilterReason::ok);
  CHECK(v.bleu >= cfg.bleu_threshold);
  CHECK(to_string(FilterReason::low_diversity) == "low_diversity");
  // Repeated placeholders must all be covered.
  v = filter_generated(du("[food] or [food]"), du("[food] please , anything at all is fine"), cfg);
  CHECK(v.reason == FilterReason::missing_slot);
}

TEST_CASE("relexicalize_with substitutes original values") {
  const auto& c = test::mini_camrest();
  const Turn& t = c.dialogs.at(0).turn(1);
  auto out = relexicalize_with(du("any [food] place that is [pricerange] ?"), t.user_delex);
  REQUIRE(out.has_value());
  CHECK(join(*out) == "any chinese place that is cheap ?");
  CHECK_FALSE(relexicalize_with(du("in the [area]"), t.user_delex).has_value());
}

TEST_CASE("select targets orders strict pairs by diversity then relaxed ones") {
  const auto& c = test::mini_camrest();
  const auto pairs = mined_pairs(c);
  const auto one = select_targets(c, pairs, 1);
  const auto all = select_targets(c, pairs, 100);
  const TurnTable turns(c);
  for (const auto& [src, list] : all) {
    REQUIRE_FALSE(list.empty());
    CHECK(one.at(src).size() == 1);
    CHECK(one.at(src).front() == list.front());
    std::vector<const ParaphrasePair*> mine;
    for (const auto& p : pairs)
      if (p.src == src) mine.push_back(&p);
    CHECK(list.size() == mine.size());
    const ParaphrasePair* best = nullptr;
    for (const auto* p : mine)
      if (!best || (best->relaxed && !p->relaxed) ||
          (best->relaxed == p->relaxed && (p->diversity > best->diversity ||
                                           (p->diversity == best->diversity && p->tgt < best->tgt))))
        best = p;
    CHECK(list.front() == turns.at(best->tgt).user_delex);
  }
}

TEST_CASE("utter-sub keeps gold states and adds relexicalized turns") {
  const auto& c = test::mini_camrest();
  const auto pairs = mined_pairs(c);
  const auto r = utter_sub(c, pairs, 1);
  CHECK(r.corpus.dialogs.size() == c.dialogs.size());
  CHECK(r.added + r.skipped == select_targets(c, pairs, 1).size());
  CHECK(r.corpus.augmented.size() == r.added);
  CHECK(r.added > 0);
  const TurnTable turns(c);
  for (const auto& a : r.corpus.augmented) {
    const Turn& orig = turns.at({a.source_dialog, a.turn.index});
    CHECK(a.turn.state == orig.state);
    CHECK(a.turn.response == orig.response);
    CHECK(a.turn.sys_acts == orig.sys_acts);
    CHECK(relexicalize(a.turn.user_delex) == a.turn.user);
  }
  // Augmented corpora survive serialization.
  const auto j = to_canonical_json(r.corpus);
  CHECK(parse_canonical(j).augmented.size() == r.added);
}

TEST_CASE("make_instance fields") {
  const auto& c = test::mini_camrest();
  const Dialog& d = c.dialogs.at(0);
  const auto first = make_instance(c, d, 1);
  CHECK(first.context.empty());
  CHECK(first.prev_belief == Tokens{"<sep>"});
  CHECK(first.target_act.empty());
  CHECK_FALSE(first.target_paraphrase.has_value());
  const auto second = make_instance(c, d, 2);
  CHECK(second.context == d.turn(1).response_delex.tokens);
  CHECK(second.prev_belief == d.turn(1).state.serialize());
  CHECK(second.target_act == serialize_acts(d.turn(1).sys_acts));
  CHECK(second.target_belief == d.turn(2).state.serialize());
  CHECK(second.db_bucket == 1);
  CHECK(instance_to_json(second).at("turn") == 2);
}

TEST_CASE("build_instances is deterministic per seed and places siblings next to originals") {
  const auto& c = test::mini_camrest();
  const auto targets = select_targets(c, mined_pairs(c), 1);
  MiningConfig cfg;
  InstanceStats stats;
  const auto a = build_instances(c, targets, ParaphraseSource::mined, 4, cfg, {}, &stats);
  const auto b = build_instances(c, targets, ParaphraseSource::mined, 4, cfg);
  const auto other = build_instances(c, targets, ParaphraseSource::mined, 5, cfg);
  CHECK(a == b);
  CHECK(a != other);
  CHECK(a.size() == other.size());
  CHECK(stats.turns == c.turn_count());
  CHECK(a.size() == stats.turns + stats.paraphrase_instances);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_paraphrase) continue;
    REQUIRE(i > 0);
    CHECK_FALSE(a[i - 1].is_paraphrase);
    CHECK(a[i - 1].ref == a[i].ref);
    CHECK(a[i - 1].target_belief == a[i].target_belief);
    CHECK(a[i - 1].target_response == a[i].target_response);
    CHECK(a[i - 1].user_input != a[i].user_input);
  }
}

TEST_CASE("model paraphrases pass through the filter") {
  const auto& c = test::mini_camrest();
  MiningConfig cfg;
  InstanceStats stats;
  const auto echo = [](const TrainingInstance& inst) { return inst.source_user; };
  auto out = build_instances(c, {}, ParaphraseSource::model, 1, cfg, echo, &stats);
  // An echo never reaches the diversity threshold.
  CHECK(stats.paraphrase_instances == 0);
  CHECK(stats.filtered == c.turn_count());
  CHECK(out.size() == c.turn_count());
  const auto drop = [](const TrainingInstance&) { return tokenize("[postcode] , i need it now , please tell me"); };
  out = build_instances(c, {}, ParaphraseSource::model, 1, cfg, drop, &stats);
  CHECK(stats.paraphrase_instances + stats.filtered + stats.unrelexicalizable == c.turn_count());
  CHECK(stats.paraphrase_instances == 0);
}

TEST_CASE("augmented corpus turns become their own instances") {
  const auto& c = test::mini_camrest();
  const auto r = utter_sub(c, mined_pairs(c), 1);
  InstanceStats stats;
  const auto out = build_instances(r.corpus, {}, ParaphraseSource::mined, 2, MiningConfig{}, {}, &stats);
  CHECK(out.size() == c.turn_count() + r.added);
  CHECK(stats.paraphrase_instances == r.added);
}
