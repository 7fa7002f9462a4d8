#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "interprior/eval.hpp"
#include "interprior/train.hpp"
#include "interprior/tta.hpp"

namespace interprior {

/// Estimator inference on every scene, assembled against the model's
/// canonical boxes. Scenes run concurrently; the result is in dataset order.
std::vector<PredictionRecord> predict_dataset(const TrainedModels& models, const Dataset& data);

struct TtaRun {
  std::vector<PredictionRecord> before;
  std::vector<PredictionRecord> after;
  std::vector<AdaptResult> results;
};

/// adapt_object on every scene. Without reset_per_scene the scenes run in
/// dataset order and the adapted weights carry over.
TtaRun run_tta(const TrainedModels& models, const Discriminator<float>& D, const Dataset& data, const TtaConfig& cfg);

/// scene,step,L_adv,flagged
void write_adv_trace_csv(const std::filesystem::path& path, const Dataset& data, const TtaRun& run);

TtaConfig tta_config_from_json(const nlohmann::json& j);

/// Root translated by `distance` meters along a seeded random direction.
KinematicHand displace_hand(const KinematicHand& hand, double distance, std::uint64_t seed);

/// Diffusion contact map for a scene from the estimator's feature z.
ContactSample predict_contact(const TrainedModels& models, const SceneRecord& rec, std::uint64_t seed);

enum class ContactSource { GroundTruth, Diffusion };

struct HandRunConfig {
  double perturb = 0.1;
  std::uint64_t seed = 0;
  ContactSource source = ContactSource::GroundTruth;
  HandOptConfig opt;
};

struct HandRunRow {
  std::string id;
  Category category = Category::Laptop;
  int contact_points = 0;
  bool flagged = false;
  /// Millimeters.
  double mpjpe_before = 0.0;
  double mpjpe_after = 0.0;
  double mpvpe_before = 0.0;
  double mpvpe_after = 0.0;
  /// IoU of the contact map used against the true one.
  double contact_iou = 1.0;
  std::vector<double> trace;
};

/// Displaces each scene's true hand, then optimizes it toward the chosen
/// contact points. `models` is only read for ContactSource::Diffusion.
std::vector<HandRunRow> run_hand_opt(const TrainedModels* models, const Dataset& data, const HandRunConfig& cfg);

void write_hand_report_csv(const std::filesystem::path& path, const std::vector<HandRunRow>& rows);
/// scene,iter,L_CD
void write_hand_trace_csv(const std::filesystem::path& path, const std::vector<HandRunRow>& rows);

}  // namespace interprior
