#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "interprior/estimator.hpp"
#include "interprior/synth.hpp"

namespace interprior {

struct PartPrediction {
  bool valid = false;
  SimilarityTransform<double> pose;
  OrientedBox<double> box;
};

struct PredictionRecord {
  std::string id;
  std::vector<PartPrediction> parts;
  std::optional<HandJoints<double>> hand_joints;
  std::optional<Points<double>> hand_surface;
  std::optional<Eigen::VectorXd> contact_confidence;
};

PredictionRecord gt_as_prediction(const SceneRecord& rec, bool with_hand = true);

template <typename Scalar>
PredictionRecord prediction_from_estimates(const std::string& id, const std::vector<PartEstimate<Scalar>>& parts) {
  PredictionRecord p;
  p.id = id;
  for (const auto& e : parts) {
    PartPrediction pp;
    pp.valid = e.valid;
    if (e.valid) {
      pp.pose.R = e.pose.R.template cast<double>();
      pp.pose.t = e.pose.t.template cast<double>();
      pp.pose.s = static_cast<double>(e.pose.s);
      pp.box = e.box.template cast<double>();
    }
    p.parts.push_back(pp);
  }
  return p;
}

enum class RowKind { Part, Hand };

/// One CSV row: a part's pose errors or a scene's hand errors. Fields that
/// do not apply are NaN.
struct MetricRow {
  RowKind kind = RowKind::Part;
  std::string category;
  std::string scene;
  int part = -1;
  bool valid = true;
  double r_err_deg = 0.0;
  double t_err_cm = 0.0;
  double iou = 0.0;
  double mpjpe_mm = 0.0;
  double mpvpe_mm = 0.0;
};

struct MetricsSummary {
  std::string category;
  int scenes = 0;
  int parts = 0;
  int invalid = 0;
  int hand_scenes = 0;
  /// Percentages.
  double acc_5deg5cm = 0.0;
  double miou = 0.0;
  /// Means over valid parts: degrees, centimeters.
  double r_err = 0.0;
  double t_err = 0.0;
  /// Millimeters; NaN without hand rows.
  double mpjpe = 0.0;
  double mpvpe = 0.0;
};

struct MetricsReport {
  std::vector<MetricRow> rows;
  /// One per category, then "all".
  std::vector<MetricsSummary> summaries;

  const MetricsSummary& summary(const std::string& category = "all") const;
};

/// Per-part rows for every scene; predictions are matched by scene id.
std::vector<MetricRow> object_rows(const std::vector<PredictionRecord>& preds, const std::vector<SceneRecord>& gts);

/// Per-scene hand rows for predictions that carry a hand.
std::vector<MetricRow> hand_rows(const std::vector<PredictionRecord>& preds, const std::vector<SceneRecord>& gts);

/// Sorted by (category, scene, part) first, so input order does not matter.
MetricsReport summarize(std::vector<MetricRow> rows);

MetricsReport eval_object(const std::vector<PredictionRecord>& preds, const std::vector<SceneRecord>& gts);

struct HandMetrics {
  double mpjpe = 0.0;
  double mpvpe = 0.0;
};

/// Mean joint and surface-point distances in millimeters, averaged over scenes.
HandMetrics eval_hand(const std::vector<HandJoints<double>>& pred_joints, const std::vector<Points<double>>& pred_surface,
                      const std::vector<HandJoints<double>>& gt_joints, const std::vector<Points<double>>& gt_surface);

/// Object and, where available, hand metrics.
MetricsReport evaluate(const std::vector<PredictionRecord>& preds, const std::vector<SceneRecord>& gts);

/// Seed for the IoU sampler of a part, from its scene id.
std::uint64_t iou_seed(const std::string& scene_id, int part);

void write_report_csv(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report_csv(const std::filesystem::path& path);
void write_summary_json(const std::filesystem::path& path, const MetricsReport& report);

/// predictions.json plus one directory per scene holding poses.f32,
/// boxes.f32 and, when present, hand_joints.f32, hand_surface.f32 and
/// contact_conf.f32.
void write_predictions(const std::filesystem::path& dir, const std::vector<PredictionRecord>& preds);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& dir);

}  // namespace interprior
