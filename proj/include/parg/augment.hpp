#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "parg/corpus.hpp"
#include "parg/mining.hpp"

namespace parg {

enum class FilterReason { ok, missing_slot, low_bleu, low_diversity };

std::string to_string(FilterReason r);

struct FilterVerdict {
  bool pass = false;
  FilterReason reason = FilterReason::ok;
  double bleu = 0.0;
  double diversity = 0.0;
};

/// Slot coverage (placeholder multiset), then BLEU, then diversity; the
/// first failing check is reported.
FilterVerdict filter_generated(const DelexUtterance& original, const DelexUtterance& candidate,
                               const MiningConfig& cfg);

/// One supervised example for the joint model. `user_input` is the surface
/// form fed to the response model; `source_user` is the delexicalized
/// original utterance read by the paraphrase model.
struct TrainingInstance {
  TurnRef ref;
  Tokens context;        // R_{t-1}, delexicalized
  Tokens prev_belief;    // serialized B_{t-1}
  Tokens user_input;     // U_t' (original or paraphrase), surface form
  Tokens source_user;    // U_t, delexicalized
  Tokens target_act;     // serialized A_{t-1}
  std::optional<Tokens> target_paraphrase;  // U_t^p, delexicalized
  Tokens target_belief;  // serialized B_t
  Tokens target_response;  // R_t, delexicalized
  int db_bucket = 0;     // 0, 1 or >1 matching entities
  bool is_paraphrase = false;

  bool operator==(const TrainingInstance&) const = default;
};

nlohmann::json instance_to_json(const TrainingInstance& inst);

/// Paraphrase targets per turn, best first: non-relaxed by descending
/// diversity, then relaxed ones.
using TargetTable = std::map<TurnRef, std::vector<DelexUtterance>>;

TargetTable select_targets(const Corpus& corpus, const std::vector<ParaphrasePair>& pairs, std::size_t max_targets = 1);

/// Substitutes the original turn's surface values into the placeholders of
/// `paraphrase`. Empty when a placeholder has no value in the original.
std::optional<Tokens> relexicalize_with(const DelexUtterance& paraphrase, const DelexUtterance& original);

int db_bucket(const Corpus& corpus, const Turn& turn);

/// Instance for turn `t` of `dialog` with the original user utterance.
TrainingInstance make_instance(const Corpus& corpus, const Dialog& dialog, int t, const TargetTable* targets = nullptr);

struct UtterSubResult {
  Corpus corpus;
  std::size_t added = 0;
  std::size_t skipped = 0;
};

/// Adds one augmented turn per paraphrase target (up to max_targets per turn);
/// original dialogs are copied untouched.
UtterSubResult utter_sub(const Corpus& corpus, const std::vector<ParaphrasePair>& pairs, std::size_t max_targets = 1);

enum class ParaphraseSource { mined, model };

/// Produces a delexicalized paraphrase for the given original-input instance.
using ParaphraseGenerator = std::function<Tokens(const TrainingInstance&)>;

struct InstanceStats {
  std::size_t turns = 0;
  std::size_t paraphrase_instances = 0;
  std::size_t filtered = 0;
  std::size_t unrelexicalizable = 0;
};

/// Seeded shuffle of turns; each turn yields its original instance followed,
/// when the paraphrase passes the filter, by the paraphrase-input sibling.
/// Augmented turns of the corpus are appended as their own instances.
std::vector<TrainingInstance> build_instances(const Corpus& corpus, const TargetTable& targets, ParaphraseSource source,
                                              std::uint64_t epoch_seed, const MiningConfig& cfg,
                                              const ParaphraseGenerator& generator = {},
                                              InstanceStats* stats = nullptr);

}  // namespace parg
