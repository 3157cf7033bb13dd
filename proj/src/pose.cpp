#include "cslr/pose.hpp"

#include <algorithm>
#include <cmath>

namespace cslr {

KeypointSequence interpolate_missing(const KeypointSequence& seq) {
  KeypointSequence out = seq;
  const std::size_t t_len = seq.length();
  if (t_len == 0) throw DataError("interpolate_missing: empty sequence");

  for (std::size_t k = 0; k < kNumLandmarks; ++k) {
    std::vector<std::size_t> valid_ts;
    for (std::size_t t = 0; t < t_len; ++t)
      if (seq.frames[t][k].valid) valid_ts.push_back(t);
    if (valid_ts.empty())
      throw DataError("interpolate_missing: landmark " + std::to_string(k) +
                      " is valid in zero frames");

    for (std::size_t t = 0; t < t_len; ++t) {
      if (seq.frames[t][k].valid) continue;
      auto next = std::lower_bound(valid_ts.begin(), valid_ts.end(), t);
      Landmark filled;
      filled.valid = true;
      if (next == valid_ts.begin()) {
        // leading gap: hold first valid value
        const Landmark& src = seq.frames[valid_ts.front()][k];
        filled.x = src.x;
        filled.y = src.y;
      } else if (next == valid_ts.end()) {
        // trailing gap: hold last valid value
        const Landmark& src = seq.frames[valid_ts.back()][k];
        filled.x = src.x;
        filled.y = src.y;
      } else {
        const std::size_t t0 = *(next - 1), t1 = *next;
        const Landmark& a = seq.frames[t0][k];
        const Landmark& b = seq.frames[t1][k];
        const double w = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
        filled.x = a.x + w * (b.x - a.x);
        filled.y = a.y + w * (b.y - a.y);
      }
      out.frames[t][k] = filled;
    }
  }
  return out;
}

KeypointSequence normalize_torso(const KeypointSequence& seq,
                                 const std::vector<std::size_t>& torso_indices) {
  if (torso_indices.empty()) throw ConfigError("normalize_torso: empty torso index set");
  KeypointSequence out = seq;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = max_x;
    for (std::size_t k : torso_indices) {
      if (k >= kNumLandmarks)
        throw ConfigError("normalize_torso: torso index " + std::to_string(k) +
                          " out of range");
      const Landmark& lm = seq.frames[t][k];
      if (!lm.valid)
        throw DataError("normalize_torso: torso landmark " + std::to_string(k) +
                        " invalid at frame " + std::to_string(t));
      min_x = std::min(min_x, lm.x);
      max_x = std::max(max_x, lm.x);
      min_y = std::min(min_y, lm.y);
      max_y = std::max(max_y, lm.y);
    }
    const double w = max_x - min_x, h = max_y - min_y;
    const double extent = std::max(w, h);
    if (extent <= 0.0)
      throw DataError("normalize_torso: degenerate torso box at frame " +
                      std::to_string(t));
    const double cx = 0.5 * (min_x + max_x), cy = 0.5 * (min_y + max_y);
    const double inv = 1.0 / extent;
    for (std::size_t k = 0; k < kNumLandmarks; ++k) {
      Landmark& lm = out.frames[t][k];
      if (!lm.valid) continue;
      lm.x = (lm.x - cx) * inv;
      lm.y = (lm.y - cy) * inv;
    }
  }
  return out;
}

FeatureSequence flatten(const KeypointSequence& seq) {
  const std::size_t t_len = seq.length();
  auto data = Tensor::zeros({t_len, kFeatureDim});
  for (std::size_t t = 0; t < t_len; ++t) {
    if (seq.frames[t].size() != kNumLandmarks)
      throw DataError("flatten: frame " + std::to_string(t) + " has " +
                      std::to_string(seq.frames[t].size()) + " landmarks, expected " +
                      std::to_string(kNumLandmarks));
    for (std::size_t k = 0; k < kNumLandmarks; ++k) {
      const Landmark& lm = seq.frames[t][k];
      if (!lm.valid)
        throw DataError("flatten: invalid landmark " + std::to_string(k) + " at frame " +
                        std::to_string(t));
      data->at(t, 2 * k) = lm.x;
      data->at(t, 2 * k + 1) = lm.y;
    }
  }
  check_finite(*data, "flatten");
  return FeatureSequence{data, t_len};
}

KeypointSequence unflatten(const FeatureSequence& features) {
  const std::size_t t_len = features.data->rows();
  if (features.data->cols() != kFeatureDim)
    throw DataError("unflatten: feature dim mismatch");
  KeypointSequence seq;
  seq.frames.assign(t_len, std::vector<Landmark>(kNumLandmarks));
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t k = 0; k < kNumLandmarks; ++k) {
      seq.frames[t][k].x = features.data->at(t, 2 * k);
      seq.frames[t][k].y = features.data->at(t, 2 * k + 1);
      seq.frames[t][k].valid = true;
    }
  return seq;
}

FeatureSequence preprocess(const KeypointSequence& seq,
                           const std::vector<std::size_t>& torso_indices) {
  return flatten(normalize_torso(interpolate_missing(seq), torso_indices));
}

}  // namespace cslr
