#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mdc {

struct KMeansConfig {
  int k = 2;
  int max_iters = 300;
  double tol = 1e-8;
  int n_restarts = 10;
  unsigned long long seed = 0;
};

struct ClusterResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x D
  double inertia = 0.0;
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding; best of n_restarts by inertia,
// ties broken by lowest restart index. Throws when fewer points than k.
ClusterResult kmeans(const Eigen::MatrixXd& points, const KMeansConfig& cfg);

// Binary masks per cluster over a T x F grid; kept_bins maps label rows to
// TF positions (bin = t*F + f). Dropped bins receive 1/k in every mask.
std::vector<Eigen::MatrixXd> labels_to_masks(const std::vector<int>& labels,
                                             const std::vector<int>& kept_bins,
                                             int n_frames, int n_freqs, int k);

}  // namespace mdc
