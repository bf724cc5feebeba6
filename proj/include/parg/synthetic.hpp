#pragma once

#include <cstdint>

#include <json.hpp>

#include "parg/corpus.hpp"

namespace parg {

/// Templated single-domain restaurant dialogs with a small database. Users
/// state food, area and price constraints in varied wording, the system asks
/// for missing constraints in a fixed order, offers the matching entity and
/// answers phone/address/postcode requests.
struct SyntheticConfig {
  int dialogs = 30;
  int entities = 40;
  /// Drives the dialogs; the database comes from `database_seed` so corpora
  /// generated with different seeds share one database.
  std::uint64_t seed = 1;
  std::uint64_t database_seed = 1;
  /// Prefix of generated dialog ids, so corpora from different seeds can be merged.
  std::string id_prefix = "syn";
};

/// Canonical corpus document (same layout `ingest` writes).
nlohmann::json synthetic_corpus_json(const SyntheticConfig& cfg);

Corpus synthetic_corpus(const SyntheticConfig& cfg);

}  // namespace parg
