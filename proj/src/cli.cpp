#include "parg/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "parg/augment.hpp"
#include "parg/log.hpp"
#include "parg/mining.hpp"
#include "parg/neural/checkpoint.hpp"
#include "parg/synthetic.hpp"
#include "parg/textmetrics.hpp"

namespace parg {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

void PipelineConfig::validate() const {
  if (version != kPipelineConfigVersion)
    throw ValidationError("unsupported config version " + std::to_string(version) + " (expected " +
                          std::to_string(kPipelineConfigVersion) + ")");
  static const std::set<std::string> levels{"trace", "debug", "info", "warn", "error", "critical", "off"};
  if (!levels.count(log_level)) throw ValidationError("unknown log level '" + log_level + "'");
  experiment.validate();
}

json pipeline_config_to_json(const PipelineConfig& c) {
  json exp = c.experiment;
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["log_level"] = c.log_level;
  j["paths"] = {{"corpus", c.paths.corpus},
                {"pairs", c.paths.pairs},
                {"checkpoint", c.paths.checkpoint},
                {"reports", c.paths.reports}};
  j["mining"] = exp.at("mining");
  j["model"] = exp.at("model");
  exp.erase("mining");
  exp.erase("model");
  j["experiment"] = exp;
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  try {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    if (!j.contains("version")) throw ValidationError("config lacks a 'version' field");
    c.version = j.at("version").get<int>();
    c.seed = j.value("seed", c.seed);
    c.log_level = j.value("log_level", c.log_level);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      c.paths.corpus = p.value("corpus", std::string());
      c.paths.pairs = p.value("pairs", std::string());
      c.paths.checkpoint = p.value("checkpoint", std::string());
      c.paths.reports = p.value("reports", std::string());
    }
    json exp = j.value("experiment", json::object());
    if (j.contains("mining")) exp["mining"] = j.at("mining");
    if (j.contains("model")) exp["model"] = j.at("model");
    if (!exp.contains("split_seed")) exp["split_seed"] = c.seed;
    if (!exp.contains("seeds")) exp["seeds"] = std::vector<std::uint64_t>{c.seed};
    c.experiment = exp.get<eval::ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return pipeline_config_from_json(j);
}

// ---------------------------------------------------------------- helpers

namespace {

void require_input(const std::string& path, const std::string& flag) {
  if (path.empty()) throw ValidationError(flag + " is required");
  if (!fs::exists(path)) throw ValidationError(flag + ": no such file '" + path + "'");
}

void require_output(const std::string& path, const std::string& flag) {
  if (path.empty()) throw ValidationError(flag + " is required");
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    throw ValidationError(flag + ": directory '" + parent.string() + "' does not exist");
}

void require_directory(const std::string& path, const std::string& flag) {
  if (path.empty()) throw ValidationError(flag + " is required");
  if (fs::exists(path) && !fs::is_directory(path)) throw ValidationError(flag + ": '" + path + "' is not a directory");
  const fs::path parent = fs::path(path).parent_path();
  if (!fs::exists(path) && !parent.empty() && !fs::is_directory(parent))
    throw ValidationError(flag + ": directory '" + parent.string() + "' does not exist");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

std::array<double, 3> parse_ratios(const std::string& s) {
  std::array<double, 3> r{};
  std::stringstream ss(s);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ':')) {
    if (i == 3) throw ValidationError("--split expects three ratios like 3:1:1");
    try {
      std::size_t used = 0;
      r[static_cast<std::size_t>(i)] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ValidationError("--split: '" + part + "' is not a number");
    }
    ++i;
  }
  if (i != 3) throw ValidationError("--split expects three ratios like 3:1:1");
  return r;
}

json belief_json(const BeliefState& b) { return belief_to_json(b.informed, b.requested); }

// Fills placeholders of a delexicalized response from the predicted belief
// and the first matching database entity.
Tokens relexicalize_response(const Tokens& response, const BeliefState& belief, const Corpus& corpus,
                             const std::string& domain) {
  std::map<SlotKey, std::string> constraints;
  for (const auto& [k, v] : belief.informed)
    if (k.domain == domain) constraints.emplace(k, v);
  const auto matches = query_database(corpus.database, domain, constraints);
  Tokens out;
  for (const auto& tok : response) {
    auto slot = Ontology::placeholder_slot(tok);
    std::optional<std::string> value;
    if (slot) {
      auto it = constraints.find({domain, *slot});
      if (it != constraints.end() && it->second != "dontcare") value = it->second;
      if (!value && !matches.empty()) {
        auto f = matches.front()->fields.find(*slot);
        if (f != matches.front()->fields.end()) value = f->second;
      }
    }
    if (value) {
      const Tokens v = tokenize(*value);
      out.insert(out.end(), v.begin(), v.end());
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::optional<std::string> log_level;
};

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) cfg = load_pipeline_config(g.config_path);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.experiment.split_seed = *g.seed;
    cfg.experiment.seeds = {*g.seed};
  }
  if (g.log_level) cfg.log_level = *g.log_level;
  cfg.validate();
  set_log_level(cfg.log_level);
  return cfg;
}

// ---------------------------------------------------------------- stages

struct IngestArgs {
  std::string input, format = "canonical", out, split_dir, split;
  std::optional<double> fraction;
};

int cmd_ingest(const IngestArgs& a, const PipelineConfig& cfg) {
  require_input(a.input, "--input");
  require_output(a.out, "--out");
  if (!a.split_dir.empty()) require_directory(a.split_dir, "--split-dir");
  if (a.fraction && !(*a.fraction > 0.0 && *a.fraction <= 1.0)) throw ValidationError("--fraction must be in (0, 1]");
  const auto ratios = a.split.empty() ? cfg.experiment.split_ratios : parse_ratios(a.split);

  Corpus corpus;
  ConversionLog log;
  if (a.format == "canonical") {
    corpus = load_canonical(a.input);
    log.dialogs = corpus.dialogs.size();
    log.turns = corpus.turn_count();
  } else {
    auto conv = convert_raw(a.input, parse_raw_schema(a.format));
    corpus = std::move(conv.corpus);
    log = std::move(conv.log);
  }
  save_canonical(corpus, a.out);
  json summary = {{"dialogs", corpus.dialogs.size()},
                  {"turns", corpus.turn_count()},
                  {"skipped_turns", log.skipped_turns},
                  {"skipped_dialogs", log.skipped_dialogs},
                  {"out_of_ontology_values", corpus.out_of_ontology.size()}};
  if (!a.split_dir.empty()) {
    fs::create_directories(a.split_dir);
    Split parts = split(corpus, ratios, cfg.seed);
    if (a.fraction && *a.fraction < 1.0) parts.train = subsample(parts.train, *a.fraction, derive_seed(cfg.seed, 0x5b));
    save_canonical(parts.train, fs::path(a.split_dir) / "train.json");
    save_canonical(parts.dev, fs::path(a.split_dir) / "dev.json");
    save_canonical(parts.test, fs::path(a.split_dir) / "test.json");
    summary["split"] = {{"train", parts.train.dialogs.size()},
                        {"dev", parts.dev.dialogs.size()},
                        {"test", parts.test.dialogs.size()}};
  }
  std::cout << summary.dump(1) << "\n";
  return kExitOk;
}

struct MineArgs {
  std::string corpus, out, orphans;
  std::optional<double> bleu, diversity, relax_step;
  bool no_relax = false;
  bool exclude_requested = false;
  bool no_fallback = false;
  int threads = 0;
};

int cmd_mine(const MineArgs& a, const PipelineConfig& cfg) {
  const std::string corpus_path = a.corpus.empty() ? cfg.paths.corpus : a.corpus;
  const std::string out_path = a.out.empty() ? cfg.paths.pairs : a.out;
  require_input(corpus_path, "--corpus");
  require_output(out_path, "--out");
  if (!a.orphans.empty()) require_output(a.orphans, "--orphan-report");
  if (a.threads < 0) throw ValidationError("--threads must be non-negative");
  MiningConfig mc = cfg.experiment.mining;
  if (a.bleu) mc.bleu_threshold = *a.bleu;
  if (a.diversity) mc.diversity_threshold = *a.diversity;
  if (a.relax_step) mc.relax_step = *a.relax_step;
  if (a.exclude_requested) mc.include_requested_slots = false;
  if (a.no_fallback) mc.bleu_fallback = false;
  mc.validate();

  const Corpus corpus = load_canonical(corpus_path);
  auto pairs = a.threads == 1 ? serial::mine_pairs(corpus, mc) : parallel::mine_pairs(corpus, mc, a.threads);
  const std::size_t strict = pairs.size();
  Relaxation relax;
  if (!a.no_relax) {
    relax = relax_for_orphans(corpus, pairs, mc);
    pairs.insert(pairs.end(), relax.added.begin(), relax.added.end());
  }
  export_pairs(pairs, out_path);
  if (!a.orphans.empty()) write_text(a.orphans, orphan_report(relax, corpus, mc.include_requested_slots).dump(1) + "\n");
  std::cout << json{{"pairs", pairs.size()},
                    {"strict_pairs", strict},
                    {"relaxed_pairs", relax.added.size()},
                    {"orphans", relax.orphans.size()},
                    {"bleu_fallback", relax.bleu_fallback.size()},
                    {"unresolved", relax.unresolved.size()}}
                   .dump(1)
            << "\n";
  return kExitOk;
}

struct AugmentArgs {
  std::string corpus, pairs, mode, out;
  std::optional<std::size_t> max_targets;
  std::optional<std::uint64_t> epoch_seed;
};

int cmd_augment(const AugmentArgs& a, const PipelineConfig& cfg) {
  const std::string corpus_path = a.corpus.empty() ? cfg.paths.corpus : a.corpus;
  const std::string pairs_path = a.pairs.empty() ? cfg.paths.pairs : a.pairs;
  require_input(corpus_path, "--corpus");
  require_input(pairs_path, "--pairs");
  require_output(a.out, "--out");
  if (a.mode != "utter-sub" && a.mode != "stream") throw ValidationError("--mode must be utter-sub or stream");
  const std::size_t max_targets = a.max_targets.value_or(cfg.experiment.max_targets);
  if (max_targets < 1) throw ValidationError("--max-targets must be at least 1");

  const Corpus corpus = load_canonical(corpus_path);
  const auto pairs = import_pairs(pairs_path);
  if (a.mode == "utter-sub") {
    const auto result = utter_sub(corpus, pairs, max_targets);
    save_canonical(result.corpus, a.out);
    std::cout << json{{"added_turns", result.added}, {"skipped_targets", result.skipped}}.dump(1) << "\n";
    return kExitOk;
  }
  const auto targets = select_targets(corpus, pairs, max_targets);
  InstanceStats stats;
  const auto instances = build_instances(corpus, targets, ParaphraseSource::mined, a.epoch_seed.value_or(cfg.seed),
                                         cfg.experiment.mining, {}, &stats);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw Error("cannot write " + a.out);
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << "\n";
  std::cout << json{{"instances", instances.size()},
                    {"turns", stats.turns},
                    {"paraphrase_instances", stats.paraphrase_instances},
                    {"filtered", stats.filtered},
                    {"unrelexicalizable", stats.unrelexicalizable}}
                   .dump(1)
            << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string corpus, dev, pairs, out, history, augmentation = "parg";
  std::optional<int> epochs, threads;
};

int cmd_train(const TrainArgs& a, const PipelineConfig& cfg) {
  const std::string corpus_path = a.corpus.empty() ? cfg.paths.corpus : a.corpus;
  const std::string out_path = a.out.empty() ? cfg.paths.checkpoint : a.out;
  require_input(corpus_path, "--corpus");
  if (!a.dev.empty()) require_input(a.dev, "--dev");
  if (!a.pairs.empty()) require_input(a.pairs, "--pairs");
  require_output(out_path, "--out");
  if (!a.history.empty()) require_output(a.history, "--history");
  const auto aug = eval::parse_augmentation(a.augmentation);
  eval::ExperimentConfig exp = cfg.experiment;
  if (a.epochs) exp.model.max_epochs = *a.epochs;
  if (a.threads) exp.model.threads = *a.threads;
  exp.validate();

  const Corpus train = load_canonical(corpus_path);
  const Corpus dev = a.dev.empty() ? Corpus{train.ontology, train.database, {}, {}, {}} : load_canonical(a.dev);
  std::optional<std::vector<ParaphrasePair>> pairs;
  if (!a.pairs.empty()) pairs = import_pairs(a.pairs);
  auto cell = eval::train_cell(train, dev, aug, cfg.seed, exp, pairs ? &*pairs : nullptr);
  neural::save_checkpoint(cell.training.best, out_path);

  json history = json::array();
  for (const auto& r : cell.training.history)
    history.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"dev_loss", r.dev_loss},
                       {"learning_rate", r.learning_rate},
                       {"event", neural::to_string(r.event)},
                       {"instances", r.instances}});
  if (!a.history.empty()) write_text(a.history, history.dump(1) + "\n");
  std::cout << json{{"epochs", cell.training.history.size()},
                    {"best_epoch", cell.training.best.epoch},
                    {"early_stopped", cell.training.early_stopped},
                    {"parameters", cell.model.params().size()},
                    {"vocab_size", cell.model.vocab().size()}}
                   .dump(1)
            << "\n";
  if (cell.training.aborted) {
    std::cerr << "error: training aborted (" << *cell.training.aborted << "); wrote the last good checkpoint\n";
    return kExitRuntime;
  }
  return kExitOk;
}

struct GenerateArgs {
  std::string ckpt, input, mode = "full-turn", corpus;
};

neural::GenerateMode parse_mode(const std::string& m) {
  if (m == "paraphrase") return neural::GenerateMode::paraphrase;
  if (m == "belief") return neural::GenerateMode::belief;
  if (m == "response") return neural::GenerateMode::response;
  if (m == "full-turn") return neural::GenerateMode::full_turn;
  throw ValidationError("--mode must be paraphrase, belief, response or full-turn");
}

int cmd_generate(const GenerateArgs& a, const PipelineConfig& cfg) {
  const std::string ckpt = a.ckpt.empty() ? cfg.paths.checkpoint : a.ckpt;
  require_input(ckpt, "--ckpt");
  require_input(a.input, "--input");
  if (!a.corpus.empty()) require_input(a.corpus, "--corpus");
  const auto mode = parse_mode(a.mode);

  json turn;
  {
    std::ifstream in(a.input);
    try {
      turn = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError("--input is not valid JSON: " + std::string(e.what()));
    }
  }
  std::optional<Corpus> corpus;
  if (!a.corpus.empty()) corpus = load_canonical(a.corpus);
  const auto model = neural::model_from_checkpoint(neural::load_checkpoint(ckpt));

  neural::GenerateInput in;
  std::string domain;
  BeliefState prev;
  try {
    in.context = tokenize(turn.value("context", std::string()));
    if (turn.contains("prev_state")) prev = belief_from_json(turn.at("prev_state"));
    in.prev_belief = prev.serialize();
    in.user = tokenize(turn.at("user").get<std::string>());
    domain = turn.value("domain", std::string());
    in.db_bucket = turn.value("db_bucket", 0);
  } catch (const json::exception& e) {
    throw ValidationError("--input: " + std::string(e.what()));
  }
  if (in.db_bucket < 0 || in.db_bucket > 2) throw ValidationError("--input: db_bucket must be 0, 1 or 2");
  in.user_delex = corpus ? delexicalize(in.user, corpus->ontology, prev, domain).tokens : in.user;
  if (corpus && !in.context.empty()) in.context = delexicalize(in.context, corpus->ontology, prev, domain).tokens;

  neural::DbLookup lookup;
  if (corpus) lookup = [&](const Tokens& span) { return eval::belief_db_bucket(*corpus, span, domain); };
  const auto gen = model.generate(in, mode, lookup);
  json out = {{"action", join(gen.action)}, {"paraphrase", join(gen.paraphrase)}};
  if (mode != neural::GenerateMode::paraphrase) {
    const auto belief = BeliefState::parse(gen.belief);
    out["belief"] = join(gen.belief);
    out["state"] = belief_json(belief);
    if (mode != neural::GenerateMode::belief) {
      out["db_bucket"] = gen.db_bucket;
      out["response_delex"] = join(gen.response);
      if (corpus) out["response"] = join(relexicalize_response(gen.response, belief, *corpus, domain));
    }
  }
  std::cout << out.dump(1) << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string corpus, out_dir, ckpt;
  bool gold = false;
  bool timings = false;
};

int cmd_evaluate(const EvaluateArgs& a, const PipelineConfig& cfg) {
  const std::string corpus_path = a.corpus.empty() ? cfg.paths.corpus : a.corpus;
  const std::string out_dir = a.out_dir.empty() ? cfg.paths.reports : a.out_dir;
  require_input(corpus_path, "--corpus");
  require_directory(out_dir, "--out-dir");
  if (!a.ckpt.empty()) require_input(a.ckpt, "--ckpt");
  if (a.gold && !a.ckpt.empty()) throw ValidationError("--gold and --ckpt are exclusive");

  const Corpus corpus = load_canonical(corpus_path);
  eval::EvalReport report;
  if (a.gold || !a.ckpt.empty()) {
    std::vector<eval::DialogPrediction> preds;
    eval::ReportRow row;
    if (a.gold) {
      for (const auto& d : corpus.dialogs) preds.push_back(eval::gold_prediction(d));
    } else {
      const auto ck = neural::load_checkpoint(a.ckpt);
      const auto model = neural::model_from_checkpoint(ck);
      preds = eval::rollout_all(model, corpus, std::max(1, ck.config.threads));
      row.augmentation = ck.config.paraphrase_model ? eval::Augmentation::parg : eval::Augmentation::none;
      row.seed = ck.config.seed;
      row.epochs = static_cast<std::size_t>(ck.epoch);
    }
    const auto s = eval::score(corpus, preds);
    row.bleu = s.bleu;
    row.emr = s.emr;
    row.success_f1 = s.success_f1;
    row.inform = s.inform;
    row.success = s.success;
    row.combined = s.combined;
    row.excluded = s.excluded;
    row.test_dialogs = s.dialogs;
    report.rows.push_back(row);
    report.validate();
  } else {
    report = eval::run_experiment(corpus, cfg.experiment);
  }
  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "report.json").string(), report.to_json().dump(1) + "\n");
  write_text((fs::path(out_dir) / "report.md").string(), report.to_markdown());
  if (a.timings) write_text((fs::path(out_dir) / "timings.json").string(), report.to_json(true).dump(1) + "\n");
  std::cout << report.to_markdown();
  for (const auto& r : report.rows)
    if (r.error) return kExitRuntime;
  return kExitOk;
}

struct StatsArgs {
  std::string corpus, pairs;
};

int cmd_stats(const StatsArgs& a, const PipelineConfig& cfg) {
  const std::string corpus_path = a.corpus.empty() ? cfg.paths.corpus : a.corpus;
  require_input(corpus_path, "--corpus");
  if (!a.pairs.empty()) require_input(a.pairs, "--pairs");
  const Corpus corpus = load_canonical(corpus_path);

  std::size_t informable = 0, requestable = 0, slots = 0, values = 0, goals = 0, informed_annotations = 0;
  for (const auto& [domain, m] : corpus.ontology.slots)
    for (const auto& [slot, spec] : m) {
      ++slots;
      if (spec.informable) ++informable;
      if (spec.requestable) ++requestable;
    }
  for (const auto& [key, set] : corpus.ontology.values) values += set.size();
  for (const auto& d : corpus.dialogs) {
    if (d.goal) ++goals;
    for (const auto& t : d.turns) informed_annotations += t.state.informed.size();
  }
  json out = {{"dialogs", corpus.dialogs.size()},
              {"turns", corpus.turn_count()},
              {"augmented_turns", corpus.augmented.size()},
              {"domains", corpus.ontology.domains.size()},
              {"slots", slots},
              {"informable_slots", informable},
              {"requestable_slots", requestable},
              {"informable_slot_types", corpus.ontology.informable_slot_types().size()},
              {"slot_values", values},
              {"database_entities", corpus.database.size()},
              {"dialogs_with_goal", goals},
              {"informed_slot_annotations", informed_annotations},
              {"out_of_ontology_values", corpus.out_of_ontology.size()}};
  if (!a.pairs.empty()) {
    const auto pairs = import_pairs(a.pairs);
    std::set<DialogFunction> functions;
    std::set<TurnRef> sources;
    std::size_t relaxed = 0;
    for (const auto& p : pairs) {
      functions.insert(p.function);
      sources.insert(p.src);
      if (p.relaxed) ++relaxed;
    }
    out["pairs"] = {{"total", pairs.size()},
                    {"relaxed", relaxed},
                    {"dialog_functions", functions.size()},
                    {"turns_with_target", sources.size()}};
  }
  std::cout << out.dump(1) << "\n";
  return kExitOk;
}

struct MetricsArgs {
  std::string which, hyp, ref;
};

int cmd_metrics(const MetricsArgs& a) {
  const Tokens hyp = tokenize(a.hyp), ref = tokenize(a.ref);
  if (ref.empty()) throw ValidationError("--ref must not be empty");
  json out;
  if (a.which == "bleu") {
    out = {{"sentence_bleu", sentence_bleu(hyp, ref)}};
  } else if (a.which == "diversity") {
    out = {{"diversity", diversity({hyp, {}}, {ref, {}})}};
  } else if (a.which.empty()) {
    out = {{"sentence_bleu", sentence_bleu(hyp, ref)},
           {"edit_distance", edit_distance(hyp, ref)},
           {"hyp_tokens", hyp.size()},
           {"ref_tokens", ref.size()}};
  } else {
    throw ValidationError("unknown metric '" + a.which + "' (expected bleu or diversity)");
  }
  std::cout << out.dump(1) << "\n";
  return kExitOk;
}

struct SynthArgs {
  std::string out, id_prefix = "syn";
  int dialogs = 30;
  int entities = 40;
  std::optional<std::uint64_t> database_seed;
};

int cmd_synth(const SynthArgs& a, const PipelineConfig& cfg) {
  require_output(a.out, "--out");
  SyntheticConfig sc;
  sc.dialogs = a.dialogs;
  sc.entities = a.entities;
  sc.seed = cfg.seed;
  sc.database_seed = a.database_seed.value_or(1);
  sc.id_prefix = a.id_prefix;
  const Corpus corpus = synthetic_corpus(sc);
  save_canonical(corpus, a.out);
  std::cout << json{{"dialogs", corpus.dialogs.size()}, {"turns", corpus.turn_count()}}.dump(1) << "\n";
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------- dispatch

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Paraphrase-augmented response generation for task-oriented dialog", "parg"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Global seed; every random choice derives from it");
  app.add_option("--config", g.config_path, "Pipeline config file (JSON)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, critical or off");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Convert or validate a corpus and write the canonical form");
  c_ingest->add_option("--input", ingest.input, "Source file")->required();
  c_ingest->add_option("--format", ingest.format, "canonical, camrest-raw or multiwoz-raw");
  c_ingest->add_option("--out", ingest.out, "Canonical corpus output")->required();
  c_ingest->add_option("--split-dir", ingest.split_dir, "Also write train/dev/test splits here");
  c_ingest->add_option("--split", ingest.split, "Split ratios, e.g. 3:1:1");
  c_ingest->add_option("--fraction", ingest.fraction, "Keep this fraction of the training split");

  MineArgs mine;
  auto* c_mine = app.add_subcommand("mine", "Mine paraphrase pairs from a corpus");
  c_mine->add_option("--corpus", mine.corpus, "Canonical corpus");
  c_mine->add_option("--out", mine.out, "Pair file (JSON lines)");
  c_mine->add_option("--bleu-th", mine.bleu, "Minimum sentence BLEU (default 0.2)");
  c_mine->add_option("--div-th", mine.diversity, "Minimum edit distance (default 3.4)");
  c_mine->add_option("--relax-step", mine.relax_step, "Diversity decrement of the relaxation pass (default 0.5)");
  c_mine->add_flag("--no-relax", mine.no_relax, "Skip the relaxation pass for turns without a pair");
  c_mine->add_flag("--exclude-requested", mine.exclude_requested,
                   "Do not count newly requested slots as mentioned slots");
  c_mine->add_flag("--no-bleu-fallback", mine.no_fallback,
                   "Leave turns unpaired when no bucket-mate reaches the BLEU threshold");
  c_mine->add_option("--orphan-report", mine.orphans, "Write the orphan report here");
  c_mine->add_option("--threads", mine.threads, "0 = all cores, 1 = serial kernel");

  AugmentArgs augment;
  auto* c_augment = app.add_subcommand("augment", "Build augmented training data");
  c_augment->add_option("--corpus", augment.corpus, "Canonical corpus");
  c_augment->add_option("--pairs", augment.pairs, "Pair file");
  c_augment->add_option("--mode", augment.mode, "utter-sub or stream")->required();
  c_augment->add_option("--out", augment.out, "Output corpus (utter-sub) or instance stream (stream)")->required();
  c_augment->add_option("--max-targets", augment.max_targets, "Paraphrase targets per turn (default 1)");
  c_augment->add_option("--epoch-seed", augment.epoch_seed, "Shuffle seed of the stream (default: global seed)");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model and write its best checkpoint");
  c_train->add_option("--corpus", train.corpus, "Training corpus");
  c_train->add_option("--dev", train.dev, "Dev corpus for LR halving and early stopping");
  c_train->add_option("--pairs", train.pairs, "Pair file (mined on the fly when absent)");
  c_train->add_option("--augmentation", train.augmentation, "none, utter-sub or parg");
  c_train->add_option("--out", train.out, "Checkpoint path");
  c_train->add_option("--history", train.history, "Write per-epoch losses here");
  c_train->add_option("--epochs", train.epochs, "Maximum epochs");
  c_train->add_option("--threads", train.threads, "Batch gradient threads");

  GenerateArgs gen;
  auto* c_generate = app.add_subcommand("generate", "Decode one turn with a trained checkpoint");
  c_generate->add_option("--ckpt", gen.ckpt, "Checkpoint");
  c_generate->add_option("--input", gen.input, "Turn JSON: user, context, prev_state, domain, db_bucket")->required();
  c_generate->add_option("--mode", gen.mode, "paraphrase, belief, response or full-turn");
  c_generate->add_option("--corpus", gen.corpus, "Corpus providing the ontology and database");

  EvaluateArgs evaluate;
  auto* c_evaluate = app.add_subcommand("evaluate", "Score a checkpoint or run the experiment grid");
  c_evaluate->add_option("--corpus", evaluate.corpus, "Canonical corpus (the test set with --ckpt)");
  c_evaluate->add_option("--out-dir", evaluate.out_dir, "Directory for report.json and report.md");
  c_evaluate->add_option("--ckpt", evaluate.ckpt, "Evaluate this checkpoint instead of running the grid");
  c_evaluate->add_flag("--gold", evaluate.gold, "Score the reference responses and states");
  c_evaluate->add_flag("--timings", evaluate.timings, "Also write timings.json with per-cell runtimes");

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Print corpus and pair statistics");
  c_stats->add_option("--corpus", stats.corpus, "Canonical corpus");
  c_stats->add_option("--pairs", stats.pairs, "Pair file");

  MetricsArgs metrics;
  auto* c_metrics = app.add_subcommand("metrics", "Sentence BLEU and edit distance of two texts");
  c_metrics->add_option("metric", metrics.which, "bleu or diversity (default: both)");
  c_metrics->add_option("--hyp", metrics.hyp, "Hypothesis text")->required();
  c_metrics->add_option("--ref", metrics.ref, "Reference text")->required();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a templated synthetic corpus");
  c_synth->add_option("--out", synth.out, "Canonical corpus output")->required();
  c_synth->add_option("--dialogs", synth.dialogs, "Number of dialogs");
  c_synth->add_option("--entities", synth.entities, "Database size");
  c_synth->add_option("--database-seed", synth.database_seed, "Seed of the database (default 1)");
  c_synth->add_option("--id-prefix", synth.id_prefix, "Dialog id prefix");

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitValidation;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::cout << app.help();
      return kExitOk;
    }
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    const PipelineConfig cfg = resolve_config(g);
    if (c_ingest->parsed()) return cmd_ingest(ingest, cfg);
    if (c_mine->parsed()) return cmd_mine(mine, cfg);
    if (c_augment->parsed()) return cmd_augment(augment, cfg);
    if (c_train->parsed()) return cmd_train(train, cfg);
    if (c_generate->parsed()) return cmd_generate(gen, cfg);
    if (c_evaluate->parsed()) return cmd_evaluate(evaluate, cfg);
    if (c_stats->parsed()) return cmd_stats(stats, cfg);
    if (c_metrics->parsed()) return cmd_metrics(metrics);
    if (c_synth->parsed()) return cmd_synth(synth, cfg);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  std::cerr << app.help();
  return kExitValidation;
}

}  // namespace parg
