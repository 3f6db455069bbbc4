#pragma once
// Scene-scale prediction through overlapping tiles. Per-tile windows carry
// a halo of context; the pyramid stage, whose image-level pooling sees the
// whole scene, runs once on a stitched coarse-feature map. With a halo of
// at least kExactHaloMargin the stitched logits match a single whole-scene
// forward pass bit for bit.

#include <vector>

#include "cldnet/features.hpp"
#include "cldnet/nn.hpp"

namespace cldnet {

// Receptive-field margin of the encoder (and of the decode path) for the
// default depth-3 network, rounded up to the coarse-grid alignment.
inline constexpr int kExactHaloMargin = 32;

struct InferenceOptions {
  int tile = 0;               // 0 = whole scene in one pass
  int halo = kExactHaloMargin;  // context pixels around each tile
};

struct ScenePrediction {
  int rows = 0, cols = 0, classes = 0;
  std::vector<float> logits;  // class-major, rows*cols per class
  std::vector<std::uint8_t> labels;
};

ScenePrediction predict_scene(nn::CldNet<float>& model,
                              const FeatureStack& input,
                              const InferenceOptions& opt = {});

}  // namespace cldnet
