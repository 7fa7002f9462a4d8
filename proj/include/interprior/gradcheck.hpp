#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace interprior {

struct GradCheckConfig {
  std::uint64_t seed = 0;
  /// Coordinates probed per parameter tensor (or input block).
  int probes = 8;
  double step = 1e-6;
  double tolerance = 1e-3;
};

struct GradCheckResult {
  std::string suite;
  int probed = 0;
  /// Probes dropped because the loss is not smooth within the step.
  int skipped = 0;
  double max_rel_error = 0.0;
  /// Worst-offending coordinate, for diagnostics.
  std::string worst;
  bool passed = false;
};

/// Central differences against the analytic gradients, in double precision.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult gradcheck_encoder(const GradCheckConfig& cfg);
GradCheckResult gradcheck_heads(const GradCheckConfig& cfg);
/// Pose loss plus a linear function of the assembled boxes, through
/// assemble_pose, w.r.t. encoder and head parameters.
GradCheckResult gradcheck_end_to_end(const GradCheckConfig& cfg);
/// Discriminator loss w.r.t. parameters and generator loss w.r.t. box vertices.
GradCheckResult gradcheck_discriminator(const GradCheckConfig& cfg);
/// Diffusion loss at a fixed (t, ε) w.r.t. denoiser parameters and z.
GradCheckResult gradcheck_denoiser(const GradCheckConfig& cfg);
GradCheckResult gradcheck_hand_chamfer(const GradCheckConfig& cfg);

std::vector<GradCheckResult> run_gradchecks(const GradCheckConfig& cfg);

}  // namespace interprior
