#pragma once
// Model / optimizer snapshots: a JSON header line describing the
// architecture and tensor directory, followed by raw little-endian float32
// blobs. Loading restores parameters, batch-norm running statistics, and
// optimizer state bit for bit.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "cldnet/nn.hpp"
#include "cldnet/optim.hpp"

namespace cldnet {

struct TrainingProgress {
  int next_epoch = 1;  // 1-based epoch the run should execute next
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
};

struct CheckpointMeta {
  std::string architecture = "cldnet";
  std::string mode = "base";  // base | cldnet-w | cldnet-o
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path,
                     const nn::CldNet<float>& model, const CheckpointMeta& meta,
                     const AdamState<float>* optimizer = nullptr,
                     const TrainingProgress* progress = nullptr);

struct LoadedCheckpoint {
  nn::CldNetConfig config;
  CheckpointMeta meta;
  std::unique_ptr<nn::CldNet<float>> model;
  std::optional<AdamState<float>> optimizer;
  std::optional<TrainingProgress> progress;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cldnet
