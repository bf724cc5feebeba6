#include <doctest.h>

#include <algorithm>

#include "parg/eval.hpp"
#include "support.hpp"

using namespace parg;
using namespace parg::eval;

namespace {

std::vector<DialogPrediction> gold_all(const Corpus& c) {
  std::vector<DialogPrediction> out;
  for (const auto& d : c.dialogs) out.push_back(gold_prediction(d));
  return out;
}

DialogPrediction& find_pred(std::vector<DialogPrediction>& preds, const std::string& id) {
  return *std::find_if(preds.begin(), preds.end(), [&](const DialogPrediction& p) { return p.dialog_id == id; });
}

void drop_token(Tokens& t, const std::string& tok) { t.erase(std::remove(t.begin(), t.end(), tok), t.end()); }

ReportRow row(double inform, double success, double bleu) {
  ReportRow r;
  r.data_fraction = 0.2;
  r.seed = 3;
  r.inform = inform;
  r.success = success;
  r.bleu = bleu;
  r.emr = 0.5;
  r.success_f1 = 0.25;
  r.combined = combined_score(inform, success, bleu);
  r.train_dialogs = 7;
  r.test_dialogs = 2;
  r.epochs = 4;
  r.runtime = 1.5;
  return r;
}

}  // namespace

TEST_CASE("entity match rate") {
  InformedSet a{{{"r", "food"}, "thai"}}, b{{{"r", "food"}, "thai"}, {{"r", "area"}, "north"}};
  CHECK(entity_match_rate({a, b}, {a, b}) == 1.0);
  CHECK(entity_match_rate({a, a}, {a, b}) == 0.5);
  CHECK(entity_match_rate({}, {}) == 0.0);
  CHECK_THROWS_AS(entity_match_rate({a}, {a, b}), ValidationError);
}

TEST_CASE("success f1 counts") {
  F1Counts c;
  CHECK(c.f1() == 1.0);
  c = success_f1_counts({{"[phone]", "[address]"}, {"[phone]"}}, {{"[phone]"}, {"[postcode]"}});
  CHECK(c.tp == 1);
  CHECK(c.fp == 2);
  CHECK(c.fn == 1);
  CHECK(c.f1() == doctest::Approx(2.0 * 1 / (2 * 1 + 2 + 1)));
  CHECK_THROWS_AS(success_f1({{}}, {}), ValidationError);
}

TEST_CASE("requestable placeholders ignore informable-only slots") {
  const auto& c = test::mini_camrest();
  const auto s = requestable_placeholders({tokenize("[name] is at [address] , [phone]"), tokenize("[name]")}, c.ontology);
  CHECK(s == std::set<std::string>{"[address]", "[name]", "[phone]"});
}

TEST_CASE("gold predictions score perfectly on the multi-domain fixture") {
  const auto& c = test::mini_multidomain();
  const Scores s = score(c, gold_all(c));
  CHECK(s.inform == 1.0);
  CHECK(s.success == 1.0);
  CHECK(s.bleu == doctest::Approx(1.0));
  CHECK(s.emr == 1.0);
  CHECK(s.success_f1 == 1.0);
  CHECK(s.combined == doctest::Approx(2.0));
  CHECK(s.excluded == 1);
  CHECK(s.dialogs == 4);
}

TEST_CASE("inform needs a name mention with a matching entity") {
  const auto& c = test::mini_multidomain();
  auto preds = gold_all(c);
  for (auto& r : find_pred(preds, "md-03").responses) drop_token(r, "[name]");
  auto is = inform_success(c, preds);
  CHECK(is.evaluated == 3);
  CHECK(is.inform == doctest::Approx(2.0 / 3));
  CHECK(is.success == doctest::Approx(2.0 / 3));

  preds = gold_all(c);
  for (auto& b : find_pred(preds, "md-02").beliefs)
    if (b.informed.count({"hotel", "stars"})) b.informed[{"hotel", "stars"}] = "5";
  is = inform_success(c, preds);
  CHECK(is.inform == doctest::Approx(2.0 / 3));
}

TEST_CASE("success needs every requested slot") {
  const auto& c = test::mini_multidomain();
  auto preds = gold_all(c);
  for (auto& r : find_pred(preds, "md-01").responses) drop_token(r, "[address]");
  const auto is = inform_success(c, preds);
  CHECK(is.inform == 1.0);
  CHECK(is.success == doctest::Approx(2.0 / 3));
}

TEST_CASE("predictions must align with the corpus") {
  const auto& c = test::mini_multidomain();
  auto preds = gold_all(c);
  preds.pop_back();
  CHECK_THROWS_AS(score(c, preds), ValidationError);
  preds = gold_all(c);
  preds[0].responses.pop_back();
  CHECK_THROWS_AS(score(c, preds), ValidationError);
  preds = gold_all(c);
  preds.push_back(preds[0]);
  CHECK_THROWS_AS(score(c, preds), ValidationError);
}

TEST_CASE("combined score identity") {
  CHECK(combined_score(0.8, 0.6, 0.2) == doctest::Approx(0.9));
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double in = rng.uniform01(), su = rng.uniform01() * in, bl = rng.uniform01();
    CHECK(combined_score(in, su, bl) == (in + su) * 0.5 + bl);
  }
}

TEST_CASE("belief spans map to database buckets") {
  const auto& c = test::mini_camrest();
  CHECK(belief_db_bucket(c, tokenize("[restaurant] food chinese ; [restaurant] area north ; <sep>"), "restaurant") == 1);
  CHECK(belief_db_bucket(c, tokenize("[restaurant] food martian ; <sep>"), "restaurant") == 0);
  CHECK(belief_db_bucket(c, tokenize("<sep>"), "restaurant") == 2);
}

TEST_CASE("report json, markdown and validation") {
  EvalReport rep;
  rep.rows = {row(0.5, 0.25, 0.1), row(1.0, 1.0, 0.3)};
  rep.rows[1].augmentation = Augmentation::parg;
  ReportRow failed;
  failed.augmentation = Augmentation::utter_sub;
  failed.error = "non-finite loss";
  rep.rows.push_back(failed);
  CHECK_NOTHROW(rep.validate());

  const auto j = rep.to_json();
  CHECK_FALSE(j.at("rows")[0].contains("runtime"));
  CHECK(rep.to_json(true).at("rows")[0].at("runtime") == 1.5);
  const EvalReport back = report_from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.rows[2].error == "non-finite loss");

  const std::string md = rep.to_markdown();
  CHECK(md.find("| data | augmentation | seed | BLEU | EMR | Success F1 | Inform | Success | Combined |") == 0);
  CHECK(md.find("| 20% | none | 3 | 0.1000 | 0.5000 | 0.2500 | 0.5000 | 0.2500 | 0.4750 |") != std::string::npos);
  CHECK(md.find("failed: non-finite loss") != std::string::npos);

  rep.rows[0].combined += 0.01;
  CHECK_THROWS_AS(rep.validate(), ValidationError);
  rep.rows[0] = row(1.5, 0.0, 0.0);
  CHECK_THROWS_AS(rep.validate(), ValidationError);
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"rows", 3}}), SchemaError);
}

TEST_CASE("augmentation names") {
  for (auto a : {Augmentation::none, Augmentation::utter_sub, Augmentation::parg})
    CHECK(parse_augmentation(to_string(a)) == a);
  CHECK(to_string(Augmentation::utter_sub) == "utter-sub");
  CHECK_THROWS_AS(parse_augmentation("both"), ValidationError);
}

TEST_CASE("experiment config round trip and validation") {
  ExperimentConfig cfg;
  cfg.fractions = {0.2};
  cfg.seeds = {4, 5};
  cfg.mining.bleu_threshold = 0.3;
  cfg.mining.bleu_fallback = false;
  cfg.model.hidden_dim = 17;
  cfg.parg_source = ParaphraseSource::mined;
  nlohmann::json j = cfg;
  const auto back = j.get<ExperimentConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.model == cfg.model);
  CHECK(back.mining.bleu_fallback == false);
  CHECK(back.seeds == cfg.seeds);

  cfg.fractions = {0.0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = ExperimentConfig{};
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  j["parg_source"] = "oracle";
  CHECK_THROWS_AS(j.get<ExperimentConfig>(), ValidationError);
}

TEST_CASE("a trained cell rolls out one prediction per turn") {
  const auto& c = test::mini_camrest();
  const Split parts = split(c, {3, 1, 1}, 2);
  ExperimentConfig cfg;
  cfg.model.embed_dim = 8;
  cfg.model.hidden_dim = 8;
  cfg.model.max_epochs = 2;
  cfg.model.batch_size = 8;
  for (auto aug : {Augmentation::none, Augmentation::utter_sub, Augmentation::parg}) {
    CAPTURE(to_string(aug));
    auto cell = train_cell(parts.train, parts.dev, aug, 1, cfg);
    CHECK(cell.training.history.size() == 2);
    CHECK(cell.model.config().paraphrase_model == (aug == Augmentation::parg));
    const auto preds = rollout_all(cell.model, parts.test, 2);
    REQUIRE(preds.size() == parts.test.dialogs.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      CHECK(preds[i].dialog_id == parts.test.dialogs[i].id);
      CHECK(preds[i].responses.size() == parts.test.dialogs[i].turns.size());
    }
    CHECK(rollout_all(cell.model, parts.test, 1).front().responses == preds.front().responses);
    const Scores s = score(parts.test, preds);
    CHECK(s.combined == doctest::Approx(combined_score(s.inform, s.success, s.bleu)));
  }
}

TEST_CASE("run_experiment fills one row per cell") {
  ExperimentConfig cfg;
  cfg.fractions = {0.5};
  cfg.augmentations = {Augmentation::none};
  cfg.seeds = {1, 2};
  cfg.model.embed_dim = 6;
  cfg.model.hidden_dim = 6;
  cfg.model.max_epochs = 1;
  const EvalReport rep = run_experiment(test::mini_camrest(), cfg);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& r : rep.rows) {
    CHECK_FALSE(r.error.has_value());
    CHECK(r.train_dialogs == 4);
    CHECK(r.epochs == 1);
  }
  CHECK(rep.rows[0].seed == 1);
  CHECK(rep.rows[1].seed == 2);
}
