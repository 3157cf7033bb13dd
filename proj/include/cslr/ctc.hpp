#pragma once

#include "cslr/ops.hpp"
#include "cslr/vocab.hpp"

namespace cslr {

struct CtcResult {
  double loss = 0.0;
  TensorPtr grad;  // d loss / d log_probs, same shape as the input
};

// Minimum frame count that can align `target`: L plus one blank between each
// adjacent repeated label.
std::size_t ctc_required_length(const GlossSequence& target);

// log_probs: T x (|V_g|+1), rows log-softmax-normalized, blank at column 0.
// Log-space forward-backward over the blank-extended target. Raises
// InfeasibleAlignmentError when T < ctc_required_length(target).
CtcResult ctc_loss(const TensorPtr& log_probs, const GlossSequence& target);

// Same loss, recorded on the tape so the gradient flows into log_probs.
double ctc_loss_on_tape(Tape* tape, const TensorPtr& log_probs,
                        const GlossSequence& target, double grad_scale = 1.0);

// Per-frame argmax (ties -> lowest index), collapse repeats, drop blanks.
GlossSequence greedy_decode(const TensorPtr& log_probs);

// Prefix beam search without a language model.
GlossSequence beam_decode(const TensorPtr& log_probs, std::size_t beam_width);

}  // namespace cslr
