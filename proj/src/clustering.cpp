#include "mdc/clustering.hpp"

#include <limits>
#include <random>
#include <stdexcept>

namespace mdc {

namespace {

ClusterResult lloyd_once(const Eigen::MatrixXd& points, const KMeansConfig& cfg,
                         std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  const int k = cfg.k;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // k-means++ seeding.
  Eigen::MatrixXd centroids(k, d);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = points.row(pick(rng));
  Eigen::VectorXd d2 =
      (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2(i);
        if (r <= 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(c) = points.row(chosen);
    d2 = d2.cwiseMin(
        (points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  ClusterResult res;
  res.labels.assign(n, 0);
  Eigen::MatrixXd next(k, d);
  Eigen::VectorXi counts(k);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    res.iterations = iter + 1;
    // Assignment step.
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dist = (points.row(i) - centroids.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      res.labels[i] = best;
    }
    // Update step.
    next.setZero();
    counts.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(res.labels[i]) += points.row(i);
      counts(res.labels[i]) += 1;
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts(c) == 0) {
        // Empty cluster: reseed at the farthest point from its centroid.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double dist =
              (points.row(i) - centroids.row(res.labels[i])).squaredNorm();
          if (dist > far_d) {
            far_d = dist;
            far = i;
          }
        }
        next.row(c) = points.row(far);
        counts(c) = 1;
      } else {
        next.row(c) /= counts(c);
      }
      shift = std::max(shift, (next.row(c) - centroids.row(c)).norm());
    }
    centroids = next;
    if (shift < cfg.tol) break;
  }

  // Final assignment against the converged centroids.
  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double dist = (points.row(i) - centroids.row(c)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    res.labels[i] = best;
    res.inertia += best_d;
  }
  res.centroids = std::move(centroids);
  return res;
}

}  // namespace

ClusterResult kmeans(const Eigen::MatrixXd& points, const KMeansConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (points.rows() < cfg.k) {
    throw std::invalid_argument("kmeans: fewer points than clusters");
  }
  std::mt19937_64 rng(cfg.seed);
  ClusterResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, cfg.n_restarts);
  for (int r = 0; r < restarts; ++r) {
    ClusterResult res = lloyd_once(points, cfg, rng);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

std::vector<Eigen::MatrixXd> labels_to_masks(const std::vector<int>& labels,
                                             const std::vector<int>& kept_bins,
                                             int n_frames, int n_freqs,
                                             int k) {
  if (labels.size() != kept_bins.size()) {
    throw std::invalid_argument("labels_to_masks: label/index count mismatch");
  }
  std::vector<Eigen::MatrixXd> masks(
      k, Eigen::MatrixXd::Constant(n_frames, n_freqs, 1.0 / k));
  // Kept bins get a hard assignment; dropped bins keep the 1/k fill.
  for (size_t i = 0; i < labels.size(); ++i) {
    const int bin = kept_bins[i];
    if (bin < 0 || bin >= n_frames * n_freqs) {
      throw std::invalid_argument("labels_to_masks: bin index out of range");
    }
    if (labels[i] < 0 || labels[i] >= k) {
      throw std::invalid_argument("labels_to_masks: label out of range");
    }
    const int t = bin / n_freqs;
    const int f = bin % n_freqs;
    for (int c = 0; c < k; ++c) masks[c](t, f) = c == labels[i] ? 1.0 : 0.0;
  }
  return masks;
}

}  // namespace mdc
