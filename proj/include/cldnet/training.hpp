#pragma once
// Training loop: input-mode pipelines, tiling, k-fold splitting, the
// epoch/early-stopping driver, and evaluation over sample sets.
//
// Gradient accumulation is defined per tile in tile-index order, so results
// are identical for any worker count.

#include <filesystem>
#include <vector>

#include "cldnet/checkpoint.hpp"
#include "cldnet/evaluation.hpp"
#include "cldnet/features.hpp"
#include "cldnet/nn.hpp"
#include "cldnet/optim.hpp"

namespace cldnet {

// base: the 76 spectral channels. with_geometry: plus the four viewing
// angles (80 channels). masked_optical: the 76 channels with every channel
// touching an albedo band suppressed, for nighttime operation.
enum class InputMode { base, with_geometry, masked_optical };

InputMode parse_input_mode(const std::string& name);  // base|cldnet-w|cldnet-o
const char* input_mode_name(InputMode mode);
int input_mode_channels(InputMode mode);

FeatureStack build_model_input(const SceneGrid& scene, InputMode mode,
                               double mask_ratio = 1.0,
                               double sub_lon_deg = kHimawariSubLonDeg);

struct TileIndex {
  int r0 = 0, c0 = 0, rows = 0, cols = 0;
  bool operator==(const TileIndex&) const = default;
};

// Covers rows x cols with tile-sized squares; the last tile in each axis is
// shifted back so it ends at the image edge (tiles then overlap rather than
// shrink). tile must be a positive multiple of `align`.
std::vector<TileIndex> make_tiles(int rows, int cols, int tile, int align = 1);

FeatureStack crop_features(const FeatureStack& stack, const TileIndex& t);
std::vector<std::uint8_t> crop_labels(const std::vector<std::uint8_t>& labels,
                                      int cols, const TileIndex& t);

// Deterministic fold assignment: a seeded shuffle of scene indices dealt
// round-robin into `folds` groups. Returns fold id per scene.
std::vector<int> kfold_assignment(int n, int folds, std::uint64_t seed);

struct TrainSample {
  FeatureStack features;
  std::vector<std::uint8_t> labels;
};

struct TrainOptions {
  int tile = 96;
  int max_epochs = 40;
  int patience = 10;  // epochs without val-loss improvement before stopping
  int workers = 1;
  std::uint64_t seed = 0;
  LrSchedule schedule;
  std::filesystem::path checkpoint_path;  // empty = no snapshots
  CheckpointMeta meta;
  // restore the best-validation parameters before returning; disable to
  // keep the final-epoch state (e.g. to continue training later)
  bool restore_best = true;
  bool verbose = false;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
};

struct EvalResult {
  double loss = 0.0;  // mean NLL over labeled pixels
  ConfusionMatrix matrix;
};

EvalResult evaluate_model(nn::CldNet<float>& model,
                          const std::vector<TrainSample>& samples, int tile);

// Trains in place; on return the model carries the best-validation-epoch
// parameters. Pass optimizer/progress from a loaded checkpoint to resume.
TrainResult train_model(nn::CldNet<float>& model,
                        const std::vector<TrainSample>& train_set,
                        const std::vector<TrainSample>& val_set,
                        const TrainOptions& opt,
                        AdamState<float>* resume_optimizer = nullptr,
                        const TrainingProgress* resume_progress = nullptr);

}  // namespace cldnet
