#include "pqmotion/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace pqmotion {

namespace {

constexpr double kEigenvalueDust = 1e-10;

Eigen::VectorXd mean_rows(const Eigen::MatrixXd& m) {
  return m.colwise().mean().transpose();
}

// Unbiased sample covariance with optional diagonal shrinkage.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& samples, double lambda,
                           bool* shrunk) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  Eigen::MatrixXd cov;
  if (n > 1)
    cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  else
    cov = Eigen::MatrixXd::Zero(d, d);
  if (n < d + 1) {
    Eigen::MatrixXd diag = cov.diagonal().asDiagonal();
    cov = (1.0 - lambda) * cov + lambda * diag;
    if (shrunk) *shrunk = true;
  }
  return cov;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    ev(i) = ev(i) > kEigenvalueDust ? std::sqrt(ev(i)) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

FrechetResult frechet_distance(const FeatureSet& a, const FeatureSet& b,
                               double shrinkage_lambda) {
  if (a.vectors.rows() == 0 || b.vectors.rows() == 0)
    throw std::invalid_argument("frechet_distance: empty feature set");
  if (a.vectors.cols() != b.vectors.cols())
    throw std::invalid_argument("frechet_distance: feature dims disagree");

  FrechetResult res;
  Eigen::VectorXd mu_a = mean_rows(a.vectors);
  Eigen::VectorXd mu_b = mean_rows(b.vectors);
  bool shrunk = false;
  Eigen::MatrixXd sa = covariance(a.vectors, shrinkage_lambda, &shrunk);
  Eigen::MatrixXd sb = covariance(b.vectors, shrinkage_lambda, &shrunk);
  res.shrinkage_applied = shrunk;

  // Tr((Sa Sb)^{1/2}) computed via the symmetric form
  // (Sa^{1/2} Sb Sa^{1/2})^{1/2}, which shares its spectrum with (Sa Sb)^{1/2}.
  Eigen::MatrixXd root_a = psd_sqrt(sa);
  Eigen::MatrixXd inner = root_a * sb * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (inner + inner.transpose()));
  double tr_cov_mean = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()(i);
    if (ev > kEigenvalueDust) tr_cov_mean += std::sqrt(ev);
  }

  double value = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() -
                 2.0 * tr_cov_mean;
  res.value = std::max(0.0, value);
  return res;
}

double variance_metric(const std::vector<MotionMat>& samples, PartRange part) {
  if (samples.size() < 2)
    throw std::invalid_argument("variance_metric: need at least 2 samples");
  const Eigen::Index frames = samples[0].rows();
  const Eigen::Index dims = samples[0].cols();
  for (const MotionMat& s : samples)
    if (s.rows() != frames || s.cols() != dims)
      throw std::invalid_argument("variance_metric: sample shapes disagree");
  if (part.lo < 0 || part.hi > dims || part.lo >= part.hi)
    throw std::invalid_argument("variance_metric: part range out of bounds");

  const double inv_s = 1.0 / static_cast<double>(samples.size());
  double total = 0.0;
  for (Eigen::Index n = 0; n < frames; ++n) {
    for (int d = part.lo; d < part.hi; ++d) {
      double m = 0.0;
      for (const MotionMat& s : samples) m += s(n, d);
      m *= inv_s;
      double v = 0.0;
      for (const MotionMat& s : samples) {
        double diff = static_cast<double>(s(n, d)) - m;
        v += diff * diff;
      }
      total += v * inv_s;
    }
  }
  return total / (static_cast<double>(frames) * part.size());
}

double mae_best_of(const MotionMat& gt, const std::vector<MotionMat>& samples) {
  if (samples.empty())
    throw std::invalid_argument("mae_best_of: need at least one sample");
  double best = std::numeric_limits<double>::infinity();
  for (const MotionMat& s : samples) {
    if (s.rows() != gt.rows() || s.cols() != gt.cols())
      throw std::invalid_argument("mae_best_of: sample shape mismatch");
    double mae =
        (s.cast<double>() - gt.cast<double>()).cwiseAbs().sum() /
        static_cast<double>(gt.size());
    best = std::min(best, mae);
  }
  return best;
}

std::vector<int> local_maxima(const Eigen::VectorXd& series) {
  std::vector<int> peaks;
  for (Eigen::Index i = 1; i + 1 < series.size(); ++i)
    if (series(i) > series(i - 1) && series(i) >= series(i + 1))
      peaks.push_back(static_cast<int>(i));
  return peaks;
}

namespace {

// Local maxima at half the series' global amplitude or above. The filter
// keeps beat detection from drowning in small wiggles, which would otherwise
// hand every series a beat near every frame.
std::vector<int> prominent_maxima(const Eigen::VectorXd& series) {
  double peak = series.maxCoeff();
  if (!(peak > 0.0)) return {};
  std::vector<int> out;
  for (int i : local_maxima(series))
    if (series(i) >= 0.5 * peak) out.push_back(i);
  return out;
}

}  // namespace

std::optional<double> beat_consistency(const AudioMat& audio,
                                       const MotionMat& motion,
                                       PartRange body, int num_event_channels,
                                       double sigma) {
  if (audio.rows() < 3 || motion.rows() < 3)
    throw std::invalid_argument("beat_consistency: need at least 3 frames");
  if (num_event_channels < 1 || num_event_channels > audio.cols())
    throw std::invalid_argument("beat_consistency: bad event channel count");

  Eigen::VectorXd audio_level =
      audio.leftCols(num_event_channels).cast<double>().rowwise().sum();
  std::vector<int> audio_beats = prominent_maxima(audio_level);
  if (audio_beats.empty()) return std::nullopt;

  // Motion beats sit at the apices of the body trajectory. The velocity of a
  // smooth gesture vanishes exactly at its apex, so the trajectory magnitude
  // is the series whose maxima align with the driving events.
  Eigen::VectorXd level(motion.rows());
  for (Eigen::Index n = 0; n < motion.rows(); ++n) {
    double s2 = 0.0;
    for (int d = body.lo; d < body.hi; ++d) {
      double v = motion(n, d);
      s2 += v * v;
    }
    level(n) = std::sqrt(s2);
  }
  std::vector<int> motion_beats = prominent_maxima(level);

  double score = 0.0;
  for (int ab : audio_beats) {
    double best = std::numeric_limits<double>::infinity();
    for (int mb : motion_beats) {
      double d = static_cast<double>(ab - mb);
      best = std::min(best, d * d);
    }
    score += motion_beats.empty()
                 ? 0.0
                 : std::exp(-best / (2.0 * sigma * sigma));
  }
  return score / static_cast<double>(audio_beats.size());
}

}  // namespace pqmotion
