#pragma once

#include <array>
#include <span>
#include <vector>

#include "parg/neural/model.hpp"

namespace parg::neural {

enum DecoderIndex { kAction = 0, kParaphrase = 1, kBelief = 2, kResponse = 3 };

/// Mean per-token cross-entropy per decoder plus their sum.
struct LossBreakdown {
  double total = 0.0;
  std::array<double, 4> parts{};  // indexed by DecoderIndex

  double action() const { return parts[kAction]; }
  double paraphrase() const { return parts[kParaphrase]; }
  double belief() const { return parts[kBelief]; }
  double response() const { return parts[kResponse]; }
};

/// One decoder's teacher-forced output: a probability row per step and the
/// gold target ids. Targets equal to Vocab::kPad are masked.
struct SequenceRows {
  std::vector<std::vector<double>> rows;
  std::vector<int> targets;
};

/// Loss from explicit probability rows; one sequence list per decoder.
/// Throws NumericError when any component is not finite.
LossBreakdown joint_loss(const std::array<std::vector<SequenceRows>, 4>& sequences);

/// Loss of a batch of teacher-forced passes. The total is accumulated
/// token by token, independently of the per-decoder means.
LossBreakdown joint_loss(std::span<const ForwardPass> passes);

/// Token counts per decoder over a batch (paraphrase only where supervised).
std::array<int, 4> token_counts(std::span<const ForwardPass> passes);

/// Backward scales that turn summed NLL gradients into gradients of the mean losses.
LossScales mean_scales(const std::array<int, 4>& counts);

/// Largest |sum(row) - 1| over every softmax and mixture row of the pass.
double normalization_error(const Model& model, const ForwardPass& fp, const EncodedInstance& inst);

/// Running per-decoder sums, for losses over sets too large to keep in memory.
class LossAccumulator {
 public:
  void add(const ForwardPass& fp);
  LossBreakdown result() const;

 private:
  std::array<double, 4> nll_{};
  std::array<long, 4> tokens_{};
};

}  // namespace parg::neural
