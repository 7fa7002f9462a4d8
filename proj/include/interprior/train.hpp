#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "interprior/checkpoint.hpp"
#include "interprior/estimator.hpp"
#include "interprior/priors.hpp"
#include "interprior/synth.hpp"

namespace interprior {

/// Keys mirror the JSON config file; see README.
struct TrainConfig {
  std::string dataset;
  LossWeights pose;
  PriorWeights prior;
  double lr = 1e-3;
  double disc_lr = 1e-4;
  double diff_lr = 1e-3;
  /// Multiplies every learning rate after each epoch.
  double lr_decay = 1.0;
  int epochs = 40;
  int batch = 8;
  /// First epoch (0-based) with the adversarial term and discriminator updates.
  int adv_start_epoch = 0;
  std::uint64_t seed = 0;
  EstimatorConfig estimator;
  std::vector<Index> disc_hidden = {256, 256};
  DiffusionConfig diffusion;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are a Usage error.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  int epoch = 0;
  double pose = 0.0;
  double seg = 0.0;
  double nocs = 0.0;
  double rot = 0.0;
  /// NaN when the term is disabled.
  double adv = 0.0;
  double diff = 0.0;
  double disc = 0.0;
};

struct TrainedModels {
  Category category = Category::Laptop;
  TrainConfig config;
  PoseEstimator<float> estimator;
  Discriminator<float> discriminator;
  ContactDiffuser<float> diffuser;
  /// Canonical boxes the estimator assembles poses against.
  std::vector<OrientedBox<double>> canonical_boxes;

  /// Fresh, seeded models sized for `num_parts`.
  static TrainedModels initialize(Category category, int num_parts, const TrainConfig& cfg);

  Checkpoint to_checkpoint() const;
  static TrainedModels from_checkpoint(const Checkpoint& ckpt);
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Joint training of estimator, discriminator and diffuser; single-threaded
/// and bit-deterministic for a fixed config.
TrainedModels train_models(const Dataset& data, const TrainConfig& cfg, std::vector<EpochLog>* log = nullptr,
                           const EpochCallback& on_epoch = {});

/// Continues training `models` in place.
void train_models(TrainedModels& models, const Dataset& data, const TrainConfig& cfg,
                  std::vector<EpochLog>* log = nullptr, const EpochCallback& on_epoch = {});

void write_loss_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

struct LayoutPretrainConfig {
  int steps = 3000;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// Corruption ranges for negatives.
  double min_angle_deg = 5.0;
  double max_angle_deg = 45.0;
  double min_offset = 0.03;
  double max_offset = 0.2;
};

/// Random single-part corruption of a layout, rotation or offset with equal
/// probability. Offsets avoid each part's own joint axis direction.
Layout<double> random_corruption(const Layout<double>& gt, const std::vector<Eigen::Vector3d>& joint_axes,
                                 std::mt19937_64& rng, const LayoutPretrainConfig& cfg);

/// A ground-truth layout plus each part's joint axis in the same frame
/// (zero for the static part).
struct LayoutSample {
  Layout<double> boxes;
  std::vector<Eigen::Vector3d> joint_axes;
};

LayoutSample sample_layout_with_axes(Category category, int drawers, std::uint64_t seed);

/// Trains D on real layouts against corrupted copies; returns the final
/// loss.
double pretrain_layout_discriminator(Discriminator<float>& D, Category category, int drawers,
                                     const LayoutPretrainConfig& cfg);

/// A checkpoint holding only the "disc" group.
Checkpoint discriminator_checkpoint(const Discriminator<float>& D, Category category);
/// Reads the discriminator from either a model or a discriminator checkpoint.
Discriminator<float> load_discriminator(const Checkpoint& ckpt);

}  // namespace interprior
