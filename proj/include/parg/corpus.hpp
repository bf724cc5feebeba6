#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "parg/common.hpp"

namespace parg {

struct SlotKey {
  std::string domain;
  std::string slot;
  auto operator<=>(const SlotKey&) const = default;
};

struct SlotSpec {
  bool informable = false;
  bool requestable = false;
};

/// Domains, slots, allowed surface values and act types of a corpus.
struct Ontology {
  std::set<std::string> domains;
  std::map<std::string, std::map<std::string, SlotSpec>> slots;
  std::map<SlotKey, std::set<std::string>> values;
  std::set<std::string> act_types;

  bool has_domain(std::string_view domain) const;
  bool has_slot(std::string_view domain, std::string_view slot) const;
  bool is_informable(std::string_view domain, std::string_view slot) const;
  bool is_requestable(std::string_view domain, std::string_view slot) const;
  /// True when `slot` is requestable in at least one domain.
  bool is_requestable_anywhere(std::string_view slot) const;

  /// Distinct informable slot names across all domains.
  std::set<std::string> informable_slot_types() const;
  /// Distinct slot names across all domains.
  std::set<std::string> slot_names() const;

  static std::string placeholder(std::string_view slot);
  /// Inverse of placeholder(); empty when `token` is not a placeholder.
  static std::optional<std::string> placeholder_slot(std::string_view token);

  void validate() const;
};

struct DialogAct {
  std::string act_type;
  std::string domain;
  std::optional<std::string> slot;

  /// `[domain] [act] slot`
  Tokens serialize() const;
  /// Compact `act-slot` form used in dialog functions, e.g. `request-leave`.
  std::string key() const;

  auto operator<=>(const DialogAct&) const = default;
};

/// Sorted concatenation of the serialized acts.
Tokens serialize_acts(const std::vector<DialogAct>& acts);

struct BeliefState {
  std::map<SlotKey, std::string> informed;
  std::set<SlotKey> requested;

  /// Informed entries `[domain] slot value... ;` in key order, the separator
  /// token, then requested entries `[domain] slot`.
  Tokens serialize() const;
  /// Lenient inverse of serialize(); malformed fragments are dropped.
  static BeliefState parse(const Tokens& span);

  bool operator==(const BeliefState&) const = default;
};

inline constexpr std::string_view kSeparatorToken = "<sep>";
inline constexpr std::string_view kEntryEndToken = ";";

struct Binding {
  std::size_t position = 0;
  std::string slot;
  Tokens surface;
  bool operator==(const Binding&) const = default;
};

struct DelexUtterance {
  Tokens tokens;
  std::vector<Binding> bindings;
  bool operator==(const DelexUtterance&) const = default;
};

struct Turn {
  int index = 1;
  Tokens user;
  DelexUtterance user_delex;
  BeliefState state;
  std::vector<DialogAct> sys_acts;
  Tokens response;
  DelexUtterance response_delex;
  std::string domain;
};

struct Goal {
  std::map<SlotKey, std::string> constraints;
  std::set<SlotKey> requested;
  bool operator==(const Goal&) const = default;
};

struct Dialog {
  std::string id;
  std::optional<Goal> goal;
  std::vector<Turn> turns;

  /// 1-based access.
  const Turn& turn(int t) const { return turns.at(static_cast<std::size_t>(t - 1)); }
};

struct Entity {
  std::string domain;
  std::map<std::string, std::string> fields;
};

/// A duplicated turn whose context comes from `source_dialog`.
struct AugmentedTurn {
  std::string source_dialog;
  Turn turn;
};

struct Corpus {
  Ontology ontology;
  std::vector<Entity> database;
  std::vector<Dialog> dialogs;
  std::vector<AugmentedTurn> augmented;
  /// (slot, value) pairs seen in belief states but absent from the ontology.
  std::set<std::pair<SlotKey, std::string>> out_of_ontology;

  const Dialog* find(std::string_view id) const;
  std::size_t turn_count() const;
};

/// Lowercases and splits on whitespace and ASCII punctuation; `[slot]`
/// placeholders stay single tokens.
Tokens tokenize(std::string_view text);

/// Longest-match-first, left-to-right replacement of value spans by `[slot]`.
/// Values informed in `state` win over ontology values of equal length;
/// remaining ties prefer the slots of `domain`, then the smaller slot name.
DelexUtterance delexicalize(const Tokens& utterance, const Ontology& ontology,
                            const BeliefState& state, std::string_view domain = {});

Tokens relexicalize(const DelexUtterance& d);

/// Recomputes user_delex/response_delex of every turn.
void delexicalize_corpus(Corpus& corpus);

Corpus parse_canonical(const nlohmann::json& doc);
Corpus load_canonical(const std::filesystem::path& path);
nlohmann::json to_canonical_json(const Corpus& corpus);
void save_canonical(const Corpus& corpus, const std::filesystem::path& path);

nlohmann::json belief_to_json(const std::map<SlotKey, std::string>& informed,
                              const std::set<SlotKey>& requested);
BeliefState belief_from_json(const nlohmann::json& j);

enum class RawSchema { camrest, multiwoz };
RawSchema parse_raw_schema(std::string_view id);

struct ConversionLog {
  std::size_t dialogs = 0;
  std::size_t turns = 0;
  std::size_t skipped_turns = 0;
  std::size_t skipped_dialogs = 0;
  std::vector<std::string> warnings;
};

struct Conversion {
  Corpus corpus;
  ConversionLog log;
};

/// Best-effort conversion of a public raw layout. For CamRest the path is
/// the dialog file; `CamRestOTGY.json` and `CamRestDB.json` are picked up
/// from the same directory when present.
Conversion convert_raw(const std::filesystem::path& path, RawSchema schema);

struct Split {
  Corpus train;
  Corpus dev;
  Corpus test;
};

/// Seeded partition of dialogs. dev/test get floor(n * ratio), train the rest.
Split split(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed);

/// Seeded selection of ceil(fraction * n) dialogs, kept in corpus order.
Corpus subsample(const Corpus& corpus, double fraction, std::uint64_t seed);

/// Copy of `corpus` restricted to the dialogs whose ids are listed.
Corpus restrict_to(const Corpus& corpus, const std::set<std::string>& ids);

/// Entities of `domain` agreeing with every constraint ("dontcare" matches anything).
std::vector<const Entity*> query_database(const std::vector<Entity>& database,
                                          std::string_view domain,
                                          const std::map<SlotKey, std::string>& constraints);

}  // namespace parg
