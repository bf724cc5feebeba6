#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "parg/common.hpp"
#include "parg/corpus.hpp"

namespace parg {

enum class BleuSmoothing { none, add_one_on_zero };

struct BleuConfig {
  int max_order = 4;
  BleuSmoothing smoothing = BleuSmoothing::add_one_on_zero;

  static BleuConfig sentence() { return {4, BleuSmoothing::add_one_on_zero}; }
  static BleuConfig corpus() { return {4, BleuSmoothing::none}; }
  void validate() const;
};

/// Clipped n-gram matches and hypothesis n-gram totals per order.
struct NgramStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  NgramStats& operator+=(const NgramStats& o);
};

NgramStats ngram_stats(std::span<const std::string> hyp, std::span<const std::string> ref, int max_order);

/// Geometric mean of the modified precisions times the brevity penalty.
/// With add-one smoothing, an order n >= 2 with zero matches uses 1 / (total + 1).
double bleu_from_stats(const NgramStats& stats, const BleuConfig& cfg);

/// Throws ValidationError when either side is empty.
double sentence_bleu(const Tokens& hyp, const Tokens& ref, const BleuConfig& cfg = BleuConfig::sentence());

/// Sums statistics over all pairs before combining. Empty hypotheses are allowed.
double corpus_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs,
                   const BleuConfig& cfg = BleuConfig::corpus());

/// Word-level Levenshtein distance, unit costs.
std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b);

/// Surface diversity of two delexicalized utterances (edit distance of their tokens).
double diversity(const DelexUtterance& a, const DelexUtterance& b);

}  // namespace parg
