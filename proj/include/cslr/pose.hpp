#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cslr/errors.hpp"
#include "cslr/tensor.hpp"

namespace cslr {

constexpr std::size_t kNumLandmarks = 86;
constexpr std::size_t kFeatureDim = kNumLandmarks * 2;  // 172

// Shoulder and hip slots of the 86-point layout (configurable).
inline const std::vector<std::size_t> kDefaultTorsoIndices = {11, 12, 23, 24};

struct Landmark {
  double x = 0.0;
  double y = 0.0;
  bool valid = false;
};

/// Variable-length sequence of per-frame landmark sets with validity flags.
struct KeypointSequence {
  std::string id;
  std::string signer_id;
  std::vector<std::string> gloss_tokens;
  // frames[t][k], every frame has exactly kNumLandmarks slots
  std::vector<std::vector<Landmark>> frames;

  std::size_t length() const { return frames.size(); }
};

/// T x 172 matrix handed to the models.
struct FeatureSequence {
  TensorPtr data;  // T x kFeatureDim
  std::size_t source_len = 0;
};

// Fills every invalid landmark: interior gaps by linear interpolation between
// the nearest valid neighbors, leading/trailing gaps by holding the nearest
// valid value. A landmark valid in zero frames raises DataError naming it.
KeypointSequence interpolate_missing(const KeypointSequence& seq);

// Per frame: center on the torso bounding box and scale both axes by
// 1/max(box_w, box_h). Requires torso landmarks valid (run after interpolation).
KeypointSequence normalize_torso(const KeypointSequence& seq,
                                 const std::vector<std::size_t>& torso_indices =
                                     kDefaultTorsoIndices);

// Row t = (x_1, y_1, ..., x_86, y_86). Residual invalid landmark raises DataError.
FeatureSequence flatten(const KeypointSequence& seq);
KeypointSequence unflatten(const FeatureSequence& features);

// interpolate -> normalize -> flatten
FeatureSequence preprocess(const KeypointSequence& seq,
                           const std::vector<std::size_t>& torso_indices =
                               kDefaultTorsoIndices);

}  // namespace cslr
