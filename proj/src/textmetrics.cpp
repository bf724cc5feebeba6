#include "parg/textmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace parg {

void BleuConfig::validate() const {
  if (max_order < 1 || max_order > 4)
    throw ValidationError("BLEU max_order must lie in [1, 4], got " + std::to_string(max_order));
}

NgramStats& NgramStats::operator+=(const NgramStats& o) {
  for (std::size_t n = 0; n < 4; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_length += o.hyp_length;
  ref_length += o.ref_length;
  return *this;
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> count_ngrams(std::span<const std::string> seq, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[Ngram(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

}  // namespace

NgramStats ngram_stats(std::span<const std::string> hyp, std::span<const std::string> ref, int max_order) {
  NgramStats s;
  s.hyp_length = hyp.size();
  s.ref_length = ref.size();
  for (int order = 1; order <= max_order; ++order) {
    const auto n = static_cast<std::size_t>(order);
    const auto h = count_ngrams(hyp, n);
    const auto r = count_ngrams(ref, n);
    std::size_t matched = 0, total = 0;
    for (const auto& [gram, count] : h) {
      total += count;
      auto it = r.find(gram);
      if (it != r.end()) matched += std::min(count, it->second);
    }
    s.matches[n - 1] = matched;
    s.totals[n - 1] = total;
  }
  return s;
}

double bleu_from_stats(const NgramStats& stats, const BleuConfig& cfg) {
  cfg.validate();
  if (stats.hyp_length == 0) return 0.0;
  double log_sum = 0.0;
  for (int order = 1; order <= cfg.max_order; ++order) {
    const auto i = static_cast<std::size_t>(order - 1);
    double num = static_cast<double>(stats.matches[i]);
    double den = static_cast<double>(stats.totals[i]);
    if (stats.matches[i] == 0) {
      if (order >= 2 && cfg.smoothing == BleuSmoothing::add_one_on_zero) {
        num = 1.0;
        den += 1.0;
      } else {
        return 0.0;
      }
    }
    log_sum += std::log(num / den);
  }
  const double c = static_cast<double>(stats.hyp_length);
  const double r = static_cast<double>(stats.ref_length);
  const double log_bp = c > r ? 0.0 : 1.0 - r / c;
  const double bleu = std::exp(log_sum / cfg.max_order + log_bp);
  return std::clamp(bleu, 0.0, 1.0);
}

double sentence_bleu(const Tokens& hyp, const Tokens& ref, const BleuConfig& cfg) {
  if (hyp.empty() || ref.empty()) throw ValidationError("sentence_bleu requires non-empty hypothesis and reference");
  return bleu_from_stats(ngram_stats(hyp, ref, cfg.max_order), cfg);
}

double corpus_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, const BleuConfig& cfg) {
  if (hyps.size() != refs.size())
    throw ValidationError("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses vs " +
                          std::to_string(refs.size()) + " references");
  cfg.validate();
  NgramStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += ngram_stats(hyps[i], refs[i], cfg.max_order);
  return bleu_from_stats(total, cfg);
}

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double diversity(const DelexUtterance& a, const DelexUtterance& b) {
  return static_cast<double>(edit_distance(a.tokens, b.tokens));
}

}  // namespace parg
