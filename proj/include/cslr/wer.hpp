#pragma once

#include "cslr/vocab.hpp"

namespace cslr {

struct EditOps {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t reference_len = 0;

  std::size_t total() const { return substitutions + insertions + deletions; }
  EditOps& operator+=(const EditOps& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    reference_len += o.reference_len;
    return *this;
  }
};

struct WerResult {
  double rate = 0.0;  // (S+I+D)/N, may exceed 1
  EditOps ops;
};

// Levenshtein with unit costs. Among minimal alignments the backtrace prefers
// substitutions over insert+delete pairs so the S/I/D split is deterministic.
// Empty reference raises DataError.
WerResult wer(const GlossSequence& ref, const GlossSequence& hyp);

// Corpus-level pooled rate: sum(S+I+D) / sum(N).
double pooled_wer(const EditOps& totals);

}  // namespace cslr
