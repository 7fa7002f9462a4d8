#pragma once

#include <vector>

#include "interprior/estimator.hpp"
#include "interprior/hand.hpp"
#include "interprior/priors.hpp"

namespace interprior {

enum class TtaScope { HeadsOnly, FullEncoder };

struct TtaConfig {
  int steps = 10;
  double lr = 1e-4;
  TtaScope scope = TtaScope::HeadsOnly;
  bool reset_per_scene = true;
};

struct AdaptResult {
  std::vector<PartEstimate<float>> initial;
  std::vector<PartEstimate<float>> adapted;
  /// L_adv before the first step and after each step.
  std::vector<double> adv_trace;
  bool flagged = false;
  ErrorCode flag = ErrorCode::TooFewPoints;
};

/// Minimizes the generator loss of a frozen discriminator on this scene's
/// predicted boxes. With reset_per_scene the estimator is left untouched;
/// otherwise the adapted weights stay in `estimator`.
AdaptResult adapt_object(PoseEstimator<float>& estimator, const Discriminator<float>& D, const Points<double>& cloud,
                         const std::vector<OrientedBox<double>>& canonical_boxes, const TtaConfig& cfg);

struct BoxAdaptResult {
  Layout<double> boxes;
  /// Rotation error (degrees) of the optimized part against the reference,
  /// before the first step and after each step.
  std::vector<double> rot_err_trace;
  std::vector<double> adv_trace;
};

/// The same loop with one part's box pose (6D rotation and center) as the
/// free variables instead of network weights.
BoxAdaptResult adapt_layout_part(const Discriminator<double>& D, const Layout<double>& boxes, std::size_t part,
                                 const Matrix3<double>& reference_rotation, int steps, double lr);

/// Rotation of a box whose edges follow the canonical corner order.
Matrix3<double> box_rotation(const OrientedBox<double>& box);

struct HandOptConfig {
  int iters = 200;
  double lr = 1e-2;
};

struct HandOptResult {
  KinematicHand hand;
  /// Chamfer loss at every evaluated iterate, the initial one first.
  std::vector<double> trace;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  /// Set when there were no contact points; the hand is returned as given.
  bool flagged = false;
};

/// Chamfer loss between the hand surface and the contact points, and its
/// gradient w.r.t. the 24 hand parameters (nearest neighbors held fixed).
double hand_chamfer(const HandParams& params, const Points<double>& contact_points, int surface_samples,
                    HandParams* grad = nullptr);

HandOptResult optimize_hand(const KinematicHand& init, const Points<double>& contact_points,
                            const HandOptConfig& cfg = {});

/// Contact points are the cloud rows where the map is 1.
HandOptResult optimize_hand(const KinematicHand& init, const ContactMap& contact, const Points<double>& cloud,
                            const HandOptConfig& cfg = {});

Points<double> select_contact_points(const ContactMap& contact, const Points<double>& cloud);

}  // namespace interprior
