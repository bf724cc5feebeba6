#include "parg/neural/loss.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace parg::neural {

namespace {

const char* kNames[4] = {"action", "paraphrase", "belief", "response"};

void check_finite(const LossBreakdown& l) {
  for (int k = 0; k < 4; ++k)
    if (!std::isfinite(l.parts[k])) throw NumericError(std::string("non-finite ") + kNames[k] + " loss");
  if (!std::isfinite(l.total)) throw NumericError("non-finite total loss");
}

const DecoderTrace& trace(const ForwardPass& fp, int k) {
  switch (k) {
    case kAction: return fp.action;
    case kParaphrase: return fp.paraphrase;
    case kBelief: return fp.belief;
    default: return fp.response;
  }
}

bool supervised(const ForwardPass& fp, int k) { return fp.loss[k].tokens > 0; }

}  // namespace

LossBreakdown joint_loss(const std::array<std::vector<SequenceRows>, 4>& sequences) {
  std::array<long, 4> counts{};
  for (int k = 0; k < 4; ++k)
    for (const auto& s : sequences[k]) {
      if (s.rows.size() != s.targets.size()) throw ValidationError("probability rows and targets differ in length");
      for (int y : s.targets)
        if (y != Vocab::kPad) ++counts[k];
    }
  LossBreakdown out;
  for (int k = 0; k < 4; ++k) {
    double sum = 0.0;
    for (const auto& s : sequences[k])
      for (std::size_t t = 0; t < s.targets.size(); ++t) {
        const int y = s.targets[t];
        if (y == Vocab::kPad) continue;
        if (y < 0 || static_cast<std::size_t>(y) >= s.rows[t].size())
          throw ValidationError("target id " + std::to_string(y) + " outside its probability row");
        const double nll = -std::log(s.rows[t][static_cast<std::size_t>(y)]);
        sum += nll;
        out.total += nll / static_cast<double>(counts[k]);
      }
    out.parts[k] = counts[k] ? sum / static_cast<double>(counts[k]) : 0.0;
  }
  check_finite(out);
  return out;
}

std::array<int, 4> token_counts(std::span<const ForwardPass> passes) {
  std::array<int, 4> counts{};
  for (const auto& fp : passes)
    for (int k = 0; k < 4; ++k) counts[k] += fp.loss[k].tokens;
  return counts;
}

LossBreakdown joint_loss(std::span<const ForwardPass> passes) {
  const auto counts = token_counts(passes);
  LossBreakdown out;
  std::array<double, 4> sums{};
  for (const auto& fp : passes)
    for (int k = 0; k < 4; ++k) {
      if (!supervised(fp, k)) continue;
      for (const auto& step : trace(fp, k).steps) {
        const double nll = -std::log(step.target_prob);
        sums[k] += nll;
        out.total += nll / counts[k];
      }
    }
  for (int k = 0; k < 4; ++k) out.parts[k] = counts[k] ? sums[k] / counts[k] : 0.0;
  check_finite(out);
  return out;
}

LossScales mean_scales(const std::array<int, 4>& counts) {
  auto inv = [](int n) { return n > 0 ? 1.0 / n : 0.0; };
  return {inv(counts[kAction]), inv(counts[kParaphrase]), inv(counts[kBelief]), inv(counts[kResponse])};
}

double normalization_error(const Model& model, const ForwardPass& fp, const EncodedInstance& inst) {
  double worst = 0.0;
  auto row_error = [&](const std::vector<double>& row) {
    worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
  };
  for (int k = 0; k < 4; ++k) {
    const auto& tr = trace(fp, k);
    const Source& src = (k == kAction || k == kParaphrase) ? inst.paraphrase_source : inst.response_source;
    for (const auto& step : tr.steps) {
      row_error(step.vocab_probs);
      for (const auto& att : step.attention) row_error(att.alpha);
      row_error(model.distribution(step, src));
    }
  }
  return worst;
}

void LossAccumulator::add(const ForwardPass& fp) {
  for (int k = 0; k < 4; ++k) {
    nll_[k] += fp.loss[k].nll;
    tokens_[k] += fp.loss[k].tokens;
  }
}

LossBreakdown LossAccumulator::result() const {
  LossBreakdown out;
  for (int k = 0; k < 4; ++k) out.parts[k] = tokens_[k] ? nll_[k] / static_cast<double>(tokens_[k]) : 0.0;
  out.total = out.parts[0] + out.parts[1] + out.parts[2] + out.parts[3];
  check_finite(out);
  return out;
}

}  // namespace parg::neural
