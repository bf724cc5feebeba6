#pragma once

#include <compare>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "parg/corpus.hpp"
#include "parg/textmetrics.hpp"

namespace parg {

struct TurnRef {
  std::string dialog;
  int turn = 0;
  auto operator<=>(const TurnRef&) const = default;
};

/// (domain, slots mentioned this turn, previous-turn system acts), kept in
/// sorted canonical form so structural equality is matching equality.
struct DialogFunction {
  std::string domain;
  std::vector<std::string> slots;
  std::vector<std::string> prev_acts;

  auto operator<=>(const DialogFunction&) const = default;
  std::string to_string() const;
};

struct ParaphrasePair {
  TurnRef src;
  TurnRef tgt;
  DialogFunction function;
  double bleu = 0.0;
  double diversity = 0.0;
  bool relaxed = false;

  auto operator<=>(const ParaphrasePair&) const = default;
};

using DiversityFn = std::function<double(const DelexUtterance&, const DelexUtterance&)>;

struct MiningConfig {
  double bleu_threshold = 0.2;
  double diversity_threshold = 3.4;
  double relax_step = 0.5;
  double relax_floor = 0.0;
  /// Count slots the user newly requests as mentioned slots.
  bool include_requested_slots = true;
  /// When no bucket-mate reaches the BLEU threshold even at the diversity
  /// floor, pair the turn with its highest-BLEU bucket-mate instead.
  bool bleu_fallback = true;
  BleuConfig bleu = BleuConfig::sentence();
  DiversityFn diversity_metric = [](const DelexUtterance& a, const DelexUtterance& b) { return diversity(a, b); };

  void validate() const;
};

DialogFunction extract_dialog_function(const Dialog& dialog, int t, const Ontology& ontology,
                                       bool include_requested = true);

/// Ordered so iteration, and everything derived from it, is deterministic.
using FunctionIndex = std::map<DialogFunction, std::vector<TurnRef>>;

FunctionIndex index_by_function(const Corpus& corpus, bool include_requested = true);

/// Lookup of user turns by reference.
class TurnTable {
 public:
  explicit TurnTable(const Corpus& corpus);
  const Turn& at(const TurnRef& ref) const;

 private:
  std::map<TurnRef, const Turn*> turns_;
};

/// Directional pairs (u -> v) within one bucket passing both thresholds.
std::vector<ParaphrasePair> mine_bucket(const DialogFunction& function, const std::vector<TurnRef>& bucket,
                                        const TurnTable& turns, const MiningConfig& cfg);

namespace serial {
std::vector<ParaphrasePair> mine_pairs(const Corpus& corpus, const MiningConfig& cfg);
}

namespace parallel {
/// Buckets are mined concurrently; output order matches the serial kernel.
std::vector<ParaphrasePair> mine_pairs(const Corpus& corpus, const MiningConfig& cfg, int threads = 0);
}

/// Uses the OpenMP kernel; results are identical to serial::mine_pairs.
std::vector<ParaphrasePair> mine_pairs(const Corpus& corpus, const MiningConfig& cfg);

struct Relaxation {
  std::vector<ParaphrasePair> added;
  /// Turns alone in their bucket.
  std::vector<TurnRef> orphans;
  /// Turns paired by the BLEU fallback (no bucket-mate reached the BLEU threshold).
  std::vector<TurnRef> bleu_fallback;
  /// Turns with bucket-mates but no admissible candidate at all.
  std::vector<TurnRef> unresolved;
};

/// For each turn without a target, lowers the diversity threshold step by step
/// (BLEU threshold fixed) and admits the most diverse passing candidate. With
/// `bleu_fallback`, a turn still unpaired at the floor gets its highest-BLEU
/// bucket-mate.
Relaxation relax_for_orphans(const Corpus& corpus, const std::vector<ParaphrasePair>& pairs, const MiningConfig& cfg);

nlohmann::json orphan_report(const Relaxation& relaxation, const Corpus& corpus, bool include_requested = true);

nlohmann::json pair_to_json(const ParaphrasePair& p);
ParaphrasePair pair_from_json(const nlohmann::json& j);

/// JSON lines, one pair per line.
void export_pairs(const std::vector<ParaphrasePair>& pairs, const std::filesystem::path& path);
std::vector<ParaphrasePair> import_pairs(const std::filesystem::path& path);

}  // namespace parg
