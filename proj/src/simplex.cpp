#include "mdc/simplex.hpp"

#include <cmath>
#include <stdexcept>

namespace mdc {

namespace {
void check_n(int n_speakers) {
  if (n_speakers < 2) {
    throw std::invalid_argument("simplex geometry requires n_speakers >= 2");
  }
}
}  // namespace

SimplexVertices simplex_vertices(int n_speakers) {
  check_n(n_speakers);
  const double n = static_cast<double>(n_speakers);
  const double scale = std::sqrt(n / (n - 1.0));
  const double diag = (n - 1.0) / n * scale;
  const double off = -1.0 / n * scale;

  Eigen::MatrixXd verts =
      Eigen::MatrixXd::Constant(n_speakers, n_speakers, off);
  verts.diagonal().setConstant(diag);
  return SimplexVertices{n_speakers, std::move(verts)};
}

double target_cosine(int n_speakers, bool same_speaker) {
  check_n(n_speakers);
  if (same_speaker) return 1.0;
  return -1.0 / (static_cast<double>(n_speakers) - 1.0);
}

double limit_deviation(int n_speakers) {
  check_n(n_speakers);
  const double n = static_cast<double>(n_speakers);
  // Deviation is the same for every row: the peak entry misses 1 by
  // 1 - sqrt((N-1)/N) and off entries miss 0 by 1/sqrt(N(N-1)).
  const double peak_gap = 1.0 - std::sqrt((n - 1.0) / n);
  const double off_gap = 1.0 / std::sqrt(n * (n - 1.0));
  return std::max(peak_gap, off_gap);
}

}  // namespace mdc
