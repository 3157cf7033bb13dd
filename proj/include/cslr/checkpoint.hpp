#pragma once

#include <filesystem>
#include <memory>

#include "cslr/conformer.hpp"
#include "cslr/fusion.hpp"
#include "cslr/vocab.hpp"

namespace cslr {

// Checkpoint = <path>.json manifest (model kind, config echo, vocabulary,
// parameter registry with offsets) + <path>.bin blob of little-endian 64-bit
// floats. Loading rejects shape mismatches by parameter name.

void save_checkpoint(const std::filesystem::path& path, SequenceModel& model,
                     const GlossVocabulary& vocab);

struct LoadedCheckpoint {
  std::unique_ptr<SequenceModel> model;
  GlossVocabulary vocab;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cslr
