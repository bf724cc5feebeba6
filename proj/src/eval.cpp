#include "parg/eval.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "parg/log.hpp"
#include "parg/neural/train.hpp"
#include "parg/neural/vocab.hpp"
#include "parg/textmetrics.hpp"

namespace parg::eval {

double entity_match_rate(const std::vector<InformedSet>& predicted, const std::vector<InformedSet>& gold) {
  if (predicted.size() != gold.size())
    throw ValidationError("entity match rate: " + std::to_string(predicted.size()) + " predictions for " +
                          std::to_string(gold.size()) + " dialogs");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (predicted[i] == gold[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double F1Counts::f1() const {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::set<std::string> requestable_placeholders(const std::vector<Tokens>& responses, const Ontology& ontology) {
  std::set<std::string> out;
  for (const auto& r : responses)
    for (const auto& tok : r) {
      auto slot = Ontology::placeholder_slot(tok);
      if (slot && ontology.is_requestable_anywhere(*slot)) out.insert(tok);
    }
  return out;
}

F1Counts success_f1_counts(const std::vector<std::set<std::string>>& generated,
                           const std::vector<std::set<std::string>>& gold) {
  if (generated.size() != gold.size()) throw ValidationError("success F1: generated and gold sets are not aligned");
  F1Counts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (const auto& s : generated[i]) (gold[i].count(s) ? c.tp : c.fp)++;
    for (const auto& s : gold[i])
      if (!generated[i].count(s)) ++c.fn;
  }
  return c;
}

double success_f1(const std::vector<std::set<std::string>>& generated, const std::vector<std::set<std::string>>& gold) {
  return success_f1_counts(generated, gold).f1();
}

namespace {

std::map<std::string, const DialogPrediction*> by_id(const std::vector<DialogPrediction>& predictions) {
  std::map<std::string, const DialogPrediction*> out;
  for (const auto& p : predictions)
    if (!out.emplace(p.dialog_id, &p).second) throw ValidationError("duplicate prediction for dialog '" + p.dialog_id + "'");
  return out;
}

const DialogPrediction& aligned(const std::map<std::string, const DialogPrediction*>& index, const Dialog& d) {
  auto it = index.find(d.id);
  if (it == index.end()) throw ValidationError("no prediction for dialog '" + d.id + "'");
  const DialogPrediction& p = *it->second;
  if (p.beliefs.size() != d.turns.size() || p.responses.size() != d.turns.size())
    throw ValidationError("prediction for dialog '" + d.id + "' does not cover every turn");
  return p;
}

bool satisfies(const Entity& e, const std::map<SlotKey, std::string>& goal, const std::string& domain) {
  for (const auto& [key, value] : goal) {
    if (key.domain != domain || value == "dontcare") continue;
    auto it = e.fields.find(key.slot);
    if (it == e.fields.end() || it->second != value) return false;
  }
  return true;
}

InformedSet domain_constraints(const BeliefState& b, const std::string& domain) {
  InformedSet out;
  for (const auto& [k, v] : b.informed)
    if (k.domain == domain) out.emplace(k, v);
  return out;
}

}  // namespace

InformSuccess inform_success(const Corpus& corpus, const std::vector<DialogPrediction>& predictions) {
  const auto index = by_id(predictions);
  const std::string name_token = Ontology::placeholder("name");
  InformSuccess out;
  std::size_t informed = 0, succeeded = 0;
  for (const auto& d : corpus.dialogs) {
    const auto& p = aligned(index, d);
    if (!d.goal) {
      ++out.excluded;
      continue;
    }
    ++out.evaluated;
    std::set<std::string> domains;
    for (const auto& [k, v] : d.goal->constraints) domains.insert(k.domain);
    bool inform = true;
    for (const auto& domain : domains) {
      bool found = false;
      for (std::size_t t = 0; t < d.turns.size() && !found; ++t) {
        if (d.turns[t].domain != domain) continue;
        const auto& r = p.responses[t];
        if (std::find(r.begin(), r.end(), name_token) == r.end()) continue;
        const auto matches = query_database(corpus.database, domain, domain_constraints(p.beliefs[t], domain));
        if (!matches.empty() && satisfies(*matches.front(), d.goal->constraints, domain)) found = true;
      }
      if (!found) {
        inform = false;
        break;
      }
    }
    if (!inform) continue;
    ++informed;
    bool success = true;
    for (const auto& key : d.goal->requested) {
      const std::string ph = Ontology::placeholder(key.slot);
      bool seen = false;
      for (const auto& r : p.responses)
        if (std::find(r.begin(), r.end(), ph) != r.end()) seen = true;
      if (!seen) {
        success = false;
        break;
      }
    }
    if (success) ++succeeded;
  }
  if (out.evaluated) {
    out.inform = static_cast<double>(informed) / static_cast<double>(out.evaluated);
    out.success = static_cast<double>(succeeded) / static_cast<double>(out.evaluated);
  }
  if (out.excluded) logger().warn("inform/success: {} dialogs without a goal excluded", out.excluded);
  return out;
}

DialogPrediction gold_prediction(const Dialog& dialog) {
  DialogPrediction p;
  p.dialog_id = dialog.id;
  for (const auto& t : dialog.turns) {
    p.beliefs.push_back(t.state);
    p.responses.push_back(t.response_delex.tokens);
  }
  return p;
}

double combined_score(double inform, double success, double bleu) { return (inform + success) * 0.5 + bleu; }

Scores score(const Corpus& corpus, const std::vector<DialogPrediction>& predictions) {
  const auto index = by_id(predictions);
  Scores s;
  std::vector<Tokens> hyps, refs;
  std::vector<InformedSet> pred_final, gold_final;
  std::vector<std::set<std::string>> gen_sets, gold_sets;
  for (const auto& d : corpus.dialogs) {
    const auto& p = aligned(index, d);
    std::vector<Tokens> gold_responses;
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      hyps.push_back(p.responses[t]);
      refs.push_back(d.turns[t].response_delex.tokens);
      gold_responses.push_back(d.turns[t].response_delex.tokens);
    }
    pred_final.push_back(p.beliefs.empty() ? InformedSet{} : p.beliefs.back().informed);
    gold_final.push_back(d.turns.empty() ? InformedSet{} : d.turns.back().state.informed);
    gen_sets.push_back(requestable_placeholders(p.responses, corpus.ontology));
    gold_sets.push_back(requestable_placeholders(gold_responses, corpus.ontology));
  }
  s.dialogs = corpus.dialogs.size();
  s.bleu = hyps.empty() ? 0.0 : corpus_bleu(hyps, refs, BleuConfig::corpus());
  s.emr = entity_match_rate(pred_final, gold_final);
  s.success_f1 = success_f1(gen_sets, gold_sets);
  const auto is = inform_success(corpus, predictions);
  s.inform = is.inform;
  s.success = is.success;
  s.excluded = is.excluded;
  s.combined = combined_score(s.inform, s.success, s.bleu);
  return s;
}

int belief_db_bucket(const Corpus& corpus, const Tokens& belief_span, const std::string& domain) {
  const auto b = BeliefState::parse(belief_span);
  const auto n = query_database(corpus.database, domain, domain_constraints(b, domain)).size();
  return n == 0 ? 0 : (n == 1 ? 1 : 2);
}

DialogPrediction rollout(const neural::Model& model, const Corpus& corpus, const Dialog& dialog) {
  DialogPrediction p;
  p.dialog_id = dialog.id;
  Tokens context;
  Tokens prev_belief = BeliefState{}.serialize();
  for (const auto& turn : dialog.turns) {
    neural::GenerateInput in{context, prev_belief, turn.user, turn.user_delex.tokens, 0};
    const auto gen = model.generate(in, neural::GenerateMode::full_turn, [&](const Tokens& span) {
      return belief_db_bucket(corpus, span, turn.domain);
    });
    p.beliefs.push_back(BeliefState::parse(gen.belief));
    p.responses.push_back(gen.response);
    context = gen.response;
    prev_belief = gen.belief;
  }
  return p;
}

std::vector<DialogPrediction> rollout_all(const neural::Model& model, const Corpus& corpus, int threads) {
  std::vector<DialogPrediction> out(corpus.dialogs.size());
  const auto n = static_cast<std::ptrdiff_t>(corpus.dialogs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(threads, 1))
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = rollout(model, corpus, corpus.dialogs[static_cast<std::size_t>(i)]);
  return out;
}

std::string to_string(Augmentation a) {
  switch (a) {
    case Augmentation::none: return "none";
    case Augmentation::utter_sub: return "utter-sub";
    case Augmentation::parg: return "parg";
  }
  return "?";
}

Augmentation parse_augmentation(std::string_view s) {
  if (s == "none") return Augmentation::none;
  if (s == "utter-sub") return Augmentation::utter_sub;
  if (s == "parg") return Augmentation::parg;
  throw ValidationError("unknown augmentation '" + std::string(s) + "' (expected none, utter-sub or parg)");
}

void ExperimentConfig::validate() const {
  if (fractions.empty() || augmentations.empty() || seeds.empty())
    throw ValidationError("experiment grid needs at least one fraction, augmentation and seed");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("data fraction must be in (0, 1]");
  for (double r : split_ratios)
    if (!(r >= 0.0)) throw ValidationError("split ratios must be non-negative");
  if (split_ratios[0] <= 0.0 || split_ratios[2] <= 0.0) throw ValidationError("train and test ratios must be positive");
  if (max_targets < 1) throw ValidationError("max_targets must be at least 1");
  if (cell_threads < 1) throw ValidationError("cell_threads must be at least 1");
  mining.validate();
  model.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  std::vector<std::string> augs;
  for (auto a : c.augmentations) augs.push_back(to_string(a));
  j = {{"fractions", c.fractions},
       {"augmentations", augs},
       {"seeds", c.seeds},
       {"split_ratios", c.split_ratios},
       {"split_seed", c.split_seed},
       {"max_targets", c.max_targets},
       {"parg_source", c.parg_source == ParaphraseSource::model ? "model" : "mined"},
       {"mining",
        {{"bleu_threshold", c.mining.bleu_threshold},
         {"diversity_threshold", c.mining.diversity_threshold},
         {"relax_step", c.mining.relax_step},
         {"relax_floor", c.mining.relax_floor},
         {"bleu_fallback", c.mining.bleu_fallback},
         {"include_requested_slots", c.mining.include_requested_slots}}},
       {"model", c.model},
       {"cell_threads", c.cell_threads}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  const ExperimentConfig d;
  c.fractions = j.value("fractions", d.fractions);
  c.augmentations.clear();
  if (j.contains("augmentations"))
    for (const auto& a : j.at("augmentations")) c.augmentations.push_back(parse_augmentation(a.get<std::string>()));
  else
    c.augmentations = d.augmentations;
  c.seeds = j.value("seeds", d.seeds);
  c.split_ratios = j.value("split_ratios", d.split_ratios);
  c.split_seed = j.value("split_seed", d.split_seed);
  c.max_targets = j.value("max_targets", d.max_targets);
  const std::string src = j.value("parg_source", std::string("model"));
  if (src != "model" && src != "mined") throw ValidationError("parg_source must be 'model' or 'mined'");
  c.parg_source = src == "model" ? ParaphraseSource::model : ParaphraseSource::mined;
  c.mining = MiningConfig{};
  if (j.contains("mining")) {
    const auto& m = j.at("mining");
    c.mining.bleu_threshold = m.value("bleu_threshold", c.mining.bleu_threshold);
    c.mining.diversity_threshold = m.value("diversity_threshold", c.mining.diversity_threshold);
    c.mining.relax_step = m.value("relax_step", c.mining.relax_step);
    c.mining.relax_floor = m.value("relax_floor", c.mining.relax_floor);
    c.mining.bleu_fallback = m.value("bleu_fallback", c.mining.bleu_fallback);
    c.mining.include_requested_slots = m.value("include_requested_slots", c.mining.include_requested_slots);
  }
  c.model = j.contains("model") ? j.at("model").get<neural::ModelConfig>() : d.model;
  c.cell_threads = j.value("cell_threads", d.cell_threads);
}

nlohmann::json EvalReport::to_json(bool include_runtime) const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"data_fraction", r.data_fraction},
                        {"augmentation", eval::to_string(r.augmentation)},
                        {"seed", r.seed},
                        {"bleu", r.bleu},
                        {"emr", r.emr},
                        {"success_f1", r.success_f1},
                        {"inform", r.inform},
                        {"success", r.success},
                        {"combined", r.combined},
                        {"train_dialogs", r.train_dialogs},
                        {"test_dialogs", r.test_dialogs},
                        {"excluded_dialogs", r.excluded},
                        {"epochs", r.epochs}};
    if (include_runtime) j["runtime"] = r.runtime;
    if (r.error) j["error"] = *r.error;
    rows_json.push_back(j);
  }
  return {{"rows", rows_json}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport rep;
  try {
    for (const auto& rj : j.at("rows")) {
      ReportRow r;
      r.data_fraction = rj.at("data_fraction").get<double>();
      r.augmentation = parse_augmentation(rj.at("augmentation").get<std::string>());
      r.seed = rj.at("seed").get<std::uint64_t>();
      r.bleu = rj.at("bleu").get<double>();
      r.emr = rj.at("emr").get<double>();
      r.success_f1 = rj.at("success_f1").get<double>();
      r.inform = rj.at("inform").get<double>();
      r.success = rj.at("success").get<double>();
      r.combined = rj.at("combined").get<double>();
      r.train_dialogs = rj.value("train_dialogs", std::size_t{0});
      r.test_dialogs = rj.value("test_dialogs", std::size_t{0});
      r.excluded = rj.value("excluded_dialogs", std::size_t{0});
      r.epochs = rj.value("epochs", std::size_t{0});
      r.runtime = rj.value("runtime", 0.0);
      if (rj.contains("error")) r.error = rj.at("error").get<std::string>();
      rep.rows.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("report: ") + e.what());
  }
  return rep;
}

void EvalReport::validate() const {
  for (const auto& r : rows) {
    if (r.error) continue;
    for (double v : {r.emr, r.success_f1, r.inform, r.success})
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("report rate outside [0, 1]");
    if (std::abs(r.combined - combined_score(r.inform, r.success, r.bleu)) > 1e-9)
      throw ValidationError("report row breaks combined = (inform + success) * 0.5 + bleu");
  }
}

std::string EvalReport::to_markdown() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "| data | augmentation | seed | BLEU | EMR | Success F1 | Inform | Success | Combined |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << std::setprecision(0) << r.data_fraction * 100 << "% | " << to_string(r.augmentation) << " | "
        << r.seed << std::setprecision(4);
    if (r.error) {
      out << " | failed: " << *r.error << " | | | | | |\n";
      continue;
    }
    out << " | " << r.bleu << " | " << r.emr << " | " << r.success_f1 << " | " << r.inform << " | " << r.success
        << " | " << r.combined << " |\n";
  }

  // Means over seeds per (fraction, augmentation).
  std::map<std::pair<double, int>, std::vector<const ReportRow*>> groups;
  for (const auto& r : rows)
    if (!r.error) groups[{r.data_fraction, static_cast<int>(r.augmentation)}].push_back(&r);
  out << "\n| data | augmentation | seeds | BLEU | EMR | Success F1 | Inform | Success | Combined |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& [key, g] : groups) {
    auto mean = [&](auto field) {
      double s = 0.0;
      for (const auto* r : g) s += r->*field;
      return s / static_cast<double>(g.size());
    };
    out << "| " << std::setprecision(0) << key.first * 100 << "% | " << to_string(static_cast<Augmentation>(key.second))
        << " | " << g.size() << std::setprecision(4) << " | " << mean(&ReportRow::bleu) << " | "
        << mean(&ReportRow::emr) << " | " << mean(&ReportRow::success_f1) << " | " << mean(&ReportRow::inform)
        << " | " << mean(&ReportRow::success) << " | " << mean(&ReportRow::combined) << " |\n";
  }
  return out.str();
}

CellModel train_cell(const Corpus& train, const Corpus& dev, Augmentation aug, std::uint64_t seed,
                     const ExperimentConfig& cfg, const std::vector<ParaphrasePair>* pairs) {
  neural::ModelConfig mcfg = cfg.model;
  mcfg.seed = seed;
  mcfg.paraphrase_model = aug == Augmentation::parg;

  Corpus training = train;
  TargetTable targets;
  if (aug != Augmentation::none) {
    std::vector<ParaphrasePair> mined;
    if (!pairs) {
      mined = mine_pairs(train, cfg.mining);
      const auto relaxed = relax_for_orphans(train, mined, cfg.mining);
      mined.insert(mined.end(), relaxed.added.begin(), relaxed.added.end());
      pairs = &mined;
    }
    if (aug == Augmentation::utter_sub)
      training = utter_sub(train, *pairs, cfg.max_targets).corpus;
    else
      targets = select_targets(train, *pairs, cfg.max_targets);
  }

  const std::uint64_t stream_seed = derive_seed(seed, 0x57);
  auto vocab_instances = build_instances(training, targets, ParaphraseSource::mined, stream_seed, cfg.mining);
  neural::Model model(mcfg, neural::Vocab::build(vocab_instances, training.ontology));

  const ParaphraseSource source = aug == Augmentation::parg ? cfg.parg_source : ParaphraseSource::mined;
  neural::InstanceStream stream = [&](int epoch, const neural::Model& current) {
    ParaphraseGenerator generator;
    if (source == ParaphraseSource::model)
      generator = [&current](const TrainingInstance& inst) {
        neural::GenerateInput in{inst.context, inst.prev_belief, inst.user_input, inst.source_user, inst.db_bucket};
        return current.generate(in, neural::GenerateMode::paraphrase).paraphrase;
      };
    const auto epoch_seed = derive_seed(stream_seed, static_cast<std::uint64_t>(epoch));
    return build_instances(training, targets, source, epoch_seed, cfg.mining, generator);
  };
  const auto dev_instances = build_instances(dev, {}, ParaphraseSource::mined, derive_seed(seed, 0xde), cfg.mining);
  auto result = neural::train(model, stream, dev_instances);
  if (result.aborted) throw NumericError(*result.aborted);
  return {std::move(model), std::move(result)};
}

EvalReport run_experiment(const Corpus& corpus, const ExperimentConfig& cfg) {
  cfg.validate();
  const Split parts = split(corpus, cfg.split_ratios, cfg.split_seed);
  struct Cell {
    double fraction;
    Augmentation aug;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double f : cfg.fractions)
    for (auto a : cfg.augmentations)
      for (auto s : cfg.seeds) cells.push_back({f, a, s});

  EvalReport report;
  report.rows.resize(cells.size());
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.cell_threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Cell& c = cells[static_cast<std::size_t>(i)];
    ReportRow& row = report.rows[static_cast<std::size_t>(i)];
    row.data_fraction = c.fraction;
    row.augmentation = c.aug;
    row.seed = c.seed;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Corpus train =
          c.fraction < 1.0 ? subsample(parts.train, c.fraction, derive_seed(c.seed, 0x5b)) : parts.train;
      row.train_dialogs = train.dialogs.size();
      row.test_dialogs = parts.test.dialogs.size();
      logger().info("cell {:.0f}% {} seed {}: training on {} dialogs", c.fraction * 100, to_string(c.aug), c.seed,
                    train.dialogs.size());
      auto cell = train_cell(train, parts.dev, c.aug, c.seed, cfg);
      row.epochs = cell.training.history.size();
      const auto preds = rollout_all(cell.model, parts.test, 1);
      const Scores s = score(parts.test, preds);
      row.bleu = s.bleu;
      row.emr = s.emr;
      row.success_f1 = s.success_f1;
      row.inform = s.inform;
      row.success = s.success;
      row.combined = s.combined;
      row.excluded = s.excluded;
    } catch (const std::exception& e) {
      logger().error("cell {:.0f}% {} seed {} failed: {}", c.fraction * 100, to_string(c.aug), c.seed, e.what());
      row.error = e.what();
    }
    row.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  report.validate();
  return report;
}

}  // namespace parg::eval
