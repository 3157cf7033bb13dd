#pragma once

#include <cstdint>

#include "cslr/pose.hpp"

namespace cslr {

enum class SplitKind { SignerIndependent, UnseenSentences };

/// Desk-scale stand-in for a real CSLR corpus: each gloss is a smooth
/// parametric landmark trajectory, sentences concatenate glosses with a short
/// cross-fade, and signers apply a fixed affine, a speed warp and jitter.
struct SynthCorpusSpec {
  std::size_t n_glosses = 6;
  std::size_t n_signers = 2;
  std::size_t n_sentences = 20;
  std::size_t sentence_len_min = 2;
  std::size_t sentence_len_max = 4;
  std::size_t frames_per_gloss_min = 5;
  std::size_t frames_per_gloss_max = 9;
  double noise_sigma = 0.005;
  double missing_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthCorpus {
  std::vector<KeypointSequence> train;
  std::vector<KeypointSequence> dev;
  std::vector<KeypointSequence> test;
};

// Deterministic under spec.seed. SI holds out signers; US holds out sentence
// compositions (dev re-renders seen sentences, test sentences are unseen and
// cover the same gloss vocabulary as train).
SynthCorpus generate_synthetic_corpus(const SynthCorpusSpec& spec, SplitKind split);

std::string gloss_name(std::size_t index);

}  // namespace cslr
