#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "pqmotion/types.hpp"

namespace pqmotion {

// Per-sequence feature vectors used by the Fréchet metric.
struct FeatureSet {
  Eigen::MatrixXd vectors;  // n x d_f, one row per sequence
  std::string source;       // "generated" | "ground-truth"
  std::string part;         // "holistic" | "body" | "face"
};

struct FrechetResult {
  double value = 0.0;
  bool shrinkage_applied = false;
};

// Fréchet distance between Gaussian fits of the two sets:
// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with a symmetric PSD
// square root and negative eigenvalue dust clipped. Covariances are shrunk
// toward their diagonal (weight lambda) when a set is too small for a
// full-rank estimate; the flag reports when that happened.
FrechetResult frechet_distance(const FeatureSet& a, const FeatureSet& b,
                               double shrinkage_lambda = 1e-3);

// Mean over frames and part channels of the across-sample variance
// (population convention). Requires >= 2 samples of equal shape.
double variance_metric(const std::vector<MotionMat>& samples, PartRange part);

// Best-of-S mean absolute error against the ground truth.
double mae_best_of(const MotionMat& gt, const std::vector<MotionMat>& samples);

// Simplified beat consistency: audio beats are prominent local maxima of the
// summed event-indicator channels, motion beats are prominent local maxima
// of the body-channel trajectory magnitude (gesture apices), and the score
// is the mean Gaussian alignment exp(-min_j (t - t_j)^2 / (2 sigma^2)) over
// audio beats. Empty when the audio track has no beats.
std::optional<double> beat_consistency(const AudioMat& audio,
                                       const MotionMat& motion,
                                       PartRange body, int num_event_channels,
                                       double sigma = 1.0);

// Shared helper: strict-left local maxima indices of a series.
std::vector<int> local_maxima(const Eigen::VectorXd& series);

}  // namespace pqmotion
