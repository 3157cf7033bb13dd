#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cslr/pose.hpp"
#include "cslr/vocab.hpp"

namespace cslr {

// Manifest: first line `schema_version: 1`, then one JSON record per line:
//   {"id": ..., "signer_id": ..., "glosses": [...], "frames": T, "blob": "rel/path"}
// Blob: little-endian float32, layout T x 86 x 3 (x, y, validity in {0,1}).

std::vector<KeypointSequence> load_dataset(const std::filesystem::path& manifest_path);

void save_dataset(const std::vector<KeypointSequence>& sequences,
                  const std::filesystem::path& manifest_path);

// Vocabulary over every gloss token in the manifest order of first appearance.
GlossVocabulary build_vocabulary(const std::vector<KeypointSequence>& sequences);

}  // namespace cslr
