#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "parg/neural/config.hpp"
#include "parg/neural/model.hpp"
#include "parg/neural/vocab.hpp"

namespace parg::neural {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout: magic "PARGCKPT", u32 version, u64 header length, JSON
/// header (config, vocabulary, counters, dev history), then u64-prefixed
/// little-endian f64 arrays: parameters, Adam first and second moments.
struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> vocab_tokens;
  int vocab_reserved = 0;
  std::vector<double> params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step = 0;
  int epoch = 0;
  double learning_rate = 0.0;
  std::vector<double> dev_history;
  std::uint32_t version = kCheckpointVersion;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Model model_from_checkpoint(const Checkpoint& c);

}  // namespace parg::neural
