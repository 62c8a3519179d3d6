#include "mdc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mdc {

namespace {

void check_pair(const EmbeddingMatrix& V, const TargetMatrix& Y) {
  if (V.data.rows() != Y.data.rows()) {
    throw std::invalid_argument("V and Y row counts differ");
  }
  if (V.data.rows() == 0 || V.data.cols() == 0) {
    throw std::invalid_argument("empty embedding matrix");
  }
  for (Eigen::Index i = 0; i < V.data.rows(); ++i) {
    if (std::abs(V.data.row(i).norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("V rows must be unit-norm within 1e-6");
    }
  }
}

}  // namespace

TargetMatrix make_targets(const std::vector<int>& labels, int n_speakers,
                          TargetMode mode) {
  if (n_speakers < 2) {
    throw std::invalid_argument("targets require n_speakers >= 2");
  }
  TargetMatrix Y;
  Y.mode = mode;
  Y.n_speakers = n_speakers;
  Y.data = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                                 n_speakers);
  const SimplexVertices simplex =
      mode == TargetMode::Simplex ? simplex_vertices(n_speakers)
                                  : SimplexVertices{};
  for (size_t i = 0; i < labels.size(); ++i) {
    const int n = labels[i];
    if (n < 0 || n >= n_speakers) {
      throw std::invalid_argument("speaker label out of range");
    }
    if (mode == TargetMode::OneHot) {
      Y.data(static_cast<Eigen::Index>(i), n) = 1.0;
    } else {
      Y.data.row(static_cast<Eigen::Index>(i)) = simplex.vertices.row(n);
    }
  }
  return Y;
}

LossValue affinity_loss_expanded(const EmbeddingMatrix& V,
                                 const TargetMatrix& Y) {
  check_pair(V, Y);
  const Eigen::MatrixXd vtv = V.data.transpose() * V.data;  // D x D
  const Eigen::MatrixXd yty = Y.data.transpose() * Y.data;  // N x N
  const Eigen::MatrixXd vty = V.data.transpose() * Y.data;  // D x N
  LossValue out;
  out.value = vtv.squaredNorm() + yty.squaredNorm() - 2.0 * vty.squaredNorm();
  // Guard against cancellation dipping slightly below zero.
  if (out.value < 0.0 && out.value > -1e-9) out.value = 0.0;
  return out;
}

LossValue affinity_loss_pairwise(const EmbeddingMatrix& V,
                                 const TargetMatrix& Y, int tf_cap) {
  check_pair(V, Y);
  if (V.data.rows() > tf_cap) {
    throw std::invalid_argument(
        "pairwise loss is an O((TF)^2) oracle; TF exceeds the cap");
  }
  const Eigen::MatrixXd diff =
      V.data * V.data.transpose() - Y.data * Y.data.transpose();
  LossValue out;
  out.value = diff.squaredNorm();
  return out;
}

LossValue affinity_loss_gradient(const EmbeddingMatrix& V,
                                 const TargetMatrix& Y) {
  LossValue out = affinity_loss_expanded(V, Y);
  out.gradient = 4.0 * (V.data * (V.data.transpose() * V.data)) -
                 4.0 * (Y.data * (Y.data.transpose() * V.data));
  return out;
}

ChimeraLoss chimera_loss(const EmbeddingMatrix& V, const TargetMatrix& Y,
                         const MaskInferenceInputs& mi, double alpha,
                         bool with_gradients) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
  const Eigen::Index T = mi.mix_mag.rows();
  const Eigen::Index F = mi.mix_mag.cols();
  if (T == 0 || F == 0) {
    throw std::invalid_argument("empty mixture magnitudes");
  }
  const double tf = static_cast<double>(T) * static_cast<double>(F);
  const size_t n_src = mi.src_mags.size();

  ChimeraLoss out;

  if (alpha > 0.0) {
    if (with_gradients) {
      LossValue dc = affinity_loss_gradient(V, Y);
      out.dc_term = dc.value / tf;
      out.grad_v = (alpha / tf) * (*dc.gradient);
    } else {
      out.dc_term = affinity_loss_expanded(V, Y).value / tf;
    }
  }

  if (alpha < 1.0) {
    if (mi.masks.size() != n_src || n_src == 0) {
      throw std::invalid_argument("mask count must match source count");
    }
    for (const auto& m : mi.masks) {
      if (m.rows() != T || m.cols() != F) {
        throw std::invalid_argument("mask shape mismatch");
      }
      if (m.minCoeff() < -1e-9 || m.maxCoeff() > 1.0 + 1e-9) {
        throw std::invalid_argument("mask entries must lie in [0, 1]");
      }
    }
    for (const auto& s : mi.src_mags) {
      if (s.rows() != T || s.cols() != F) {
        throw std::invalid_argument("source magnitude shape mismatch");
      }
    }
    // Permutation-minimal magnitude-spectrum approximation.
    std::vector<Eigen::MatrixXd> masked(n_src);
    for (size_t n = 0; n < n_src; ++n) {
      masked[n] = mi.masks[n].cwiseProduct(mi.mix_mag);
    }
    std::vector<int> perm(n_src);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best_perm = perm;
    double best = std::numeric_limits<double>::infinity();
    do {
      double cost = 0.0;
      for (size_t n = 0; n < n_src; ++n) {
        cost += (masked[n] - mi.src_mags[perm[n]]).squaredNorm();
      }
      if (cost < best) {
        best = cost;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.mi_term = best / tf;
    out.permutation = best_perm;
    if (with_gradients) {
      std::vector<Eigen::MatrixXd> gm(n_src);
      const double w = 2.0 * (1.0 - alpha) / tf;
      for (size_t n = 0; n < n_src; ++n) {
        gm[n] = w * (masked[n] - mi.src_mags[best_perm[n]])
                    .cwiseProduct(mi.mix_mag);
      }
      out.grad_masks = std::move(gm);
    }
  }

  out.value = alpha * out.dc_term + (1.0 - alpha) * out.mi_term;
  if (with_gradients && !out.grad_v && V.data.size() > 0) {
    out.grad_v = Eigen::MatrixXd::Zero(V.data.rows(), V.data.cols());
  }
  return out;
}

}  // namespace mdc
