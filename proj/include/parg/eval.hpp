#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "parg/augment.hpp"
#include "parg/corpus.hpp"
#include "parg/mining.hpp"
#include "parg/neural/model.hpp"
#include "parg/neural/config.hpp"
#include "parg/neural/train.hpp"

namespace parg::eval {

using InformedSet = std::map<SlotKey, std::string>;

/// Fraction of dialogs whose final predicted informed set equals the gold one.
double entity_match_rate(const std::vector<InformedSet>& predicted, const std::vector<InformedSet>& gold);

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// 1 when there is nothing to find and nothing was produced.
  double f1() const;
};

/// Requestable placeholders (e.g. `[phone]`) in a set of delexicalized responses.
std::set<std::string> requestable_placeholders(const std::vector<Tokens>& responses, const Ontology& ontology);

/// Micro-F1 over per-dialog placeholder sets.
F1Counts success_f1_counts(const std::vector<std::set<std::string>>& generated,
                           const std::vector<std::set<std::string>>& gold);
double success_f1(const std::vector<std::set<std::string>>& generated, const std::vector<std::set<std::string>>& gold);

/// Model output for one dialog, one entry per turn.
struct DialogPrediction {
  std::string dialog_id;
  std::vector<BeliefState> beliefs;
  std::vector<Tokens> responses;  // delexicalized
};

struct InformSuccess {
  double inform = 0.0;
  double success = 0.0;
  std::size_t evaluated = 0;
  /// Dialogs without a goal.
  std::size_t excluded = 0;
};

/// Inform: for every goal domain, some turn of that domain whose response
/// contains `[name]` and whose first database match under the predicted
/// constraints satisfies the goal. Success: inform and every goal-requested
/// slot placeholder appears in some response.
InformSuccess inform_success(const Corpus& corpus, const std::vector<DialogPrediction>& predictions);

/// Reference responses and states as a prediction (self-evaluation).
DialogPrediction gold_prediction(const Dialog& dialog);

struct Scores {
  double bleu = 0.0;
  double emr = 0.0;
  double success_f1 = 0.0;
  double inform = 0.0;
  double success = 0.0;
  double combined = 0.0;
  std::size_t dialogs = 0;
  std::size_t excluded = 0;
};

double combined_score(double inform, double success, double bleu);

/// Every metric of a set of predictions against `corpus` (aligned by dialog id).
Scores score(const Corpus& corpus, const std::vector<DialogPrediction>& predictions);

/// Dialog-level rollout: each turn reads the gold user utterance, the
/// previously generated response and the previously predicted belief span.
DialogPrediction rollout(const neural::Model& model, const Corpus& corpus, const Dialog& dialog);

std::vector<DialogPrediction> rollout_all(const neural::Model& model, const Corpus& corpus, int threads = 1);

/// Database bucket (0, 1, more) for a decoded belief span in `domain`.
int belief_db_bucket(const Corpus& corpus, const Tokens& belief_span, const std::string& domain);

enum class Augmentation { none, utter_sub, parg };

std::string to_string(Augmentation a);
Augmentation parse_augmentation(std::string_view s);

struct ExperimentConfig {
  std::vector<double> fractions{0.2, 0.5, 1.0};
  std::vector<Augmentation> augmentations{Augmentation::none, Augmentation::utter_sub, Augmentation::parg};
  std::vector<std::uint64_t> seeds{1};
  std::array<double, 3> split_ratios{3.0, 1.0, 1.0};
  std::uint64_t split_seed = 1;
  std::size_t max_targets = 1;
  ParaphraseSource parg_source = ParaphraseSource::model;
  MiningConfig mining;
  neural::ModelConfig model;
  /// Experiment cells run concurrently (each cell stays single-threaded).
  int cell_threads = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct ReportRow {
  double data_fraction = 1.0;
  Augmentation augmentation = Augmentation::none;
  std::uint64_t seed = 0;
  double bleu = 0.0;
  double emr = 0.0;
  double success_f1 = 0.0;
  double inform = 0.0;
  double success = 0.0;
  double combined = 0.0;
  double runtime = 0.0;  // seconds
  std::size_t train_dialogs = 0;
  std::size_t test_dialogs = 0;
  std::size_t excluded = 0;
  std::size_t epochs = 0;
  std::optional<std::string> error;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  /// Wall-clock runtimes are left out unless asked for, so reports of
  /// identical runs compare byte for byte.
  nlohmann::json to_json(bool include_runtime = false) const;
  /// Table with one line per cell plus per-setting means over seeds.
  std::string to_markdown() const;
  /// Throws ValidationError when a row breaks the combined-score identity or a rate leaves [0, 1].
  void validate() const;
};

EvalReport report_from_json(const nlohmann::json& j);

struct CellModel {
  neural::Model model;
  neural::TrainResult training;
};

/// Trains on `train` with the given augmentation. Paraphrase pairs are mined
/// from `train` (with orphan relaxation) unless `pairs` is given.
CellModel train_cell(const Corpus& train, const Corpus& dev, Augmentation aug, std::uint64_t seed,
                     const ExperimentConfig& cfg, const std::vector<ParaphrasePair>* pairs = nullptr);

EvalReport run_experiment(const Corpus& corpus, const ExperimentConfig& cfg);

}  // namespace parg::eval
