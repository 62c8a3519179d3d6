#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mdc/simplex.hpp"

namespace mdc {

// Row-normalized TF x D embedding matrix with its spectrogram shape.
struct EmbeddingMatrix {
  Eigen::MatrixXd data;  // TF x D, unit-norm rows
  int n_frames = 0;      // T
  int n_freqs = 0;       // F
  int dim = 0;           // D
};

// TF x N per-bin target rows: one-hot or simplex vertices.
struct TargetMatrix {
  Eigen::MatrixXd data;  // TF x N
  TargetMode mode = TargetMode::OneHot;
  int n_speakers = 0;
};

struct LossValue {
  double value = 0.0;
  std::optional<Eigen::MatrixXd> gradient;  // dL/dV, TF x D
};

// Builds a TargetMatrix from per-bin dominant-speaker labels.
TargetMatrix make_targets(const std::vector<int>& labels, int n_speakers,
                          TargetMode mode);

// ||V'V||_F^2 + ||Y'Y||_F^2 - 2||V'Y||_F^2. Never materializes a TFxTF
// matrix. Throws on shape mismatch or non-normalized V rows.
LossValue affinity_loss_expanded(const EmbeddingMatrix& V,
                                 const TargetMatrix& Y);

// ||VV' - YY'||_F^2 by direct construction. Test oracle only: the TFxTF
// Gram matrices are materialized, so TF is capped.
LossValue affinity_loss_pairwise(const EmbeddingMatrix& V,
                                 const TargetMatrix& Y,
                                 int tf_cap = 4096);

// Expanded loss plus its analytic gradient 4V(V'V) - 4Y(Y'V), taken with
// respect to the rows of V as free variables.
LossValue affinity_loss_gradient(const EmbeddingMatrix& V,
                                 const TargetMatrix& Y);

// Inputs to the mask-inference loss term: estimated ratio masks and the
// magnitude spectra they are compared against.
struct MaskInferenceInputs {
  std::vector<Eigen::MatrixXd> masks;     // N matrices, T x F, entries in [0,1]
  Eigen::MatrixXd mix_mag;                // T x F
  std::vector<Eigen::MatrixXd> src_mags;  // N matrices, T x F
};

struct ChimeraLoss {
  double value = 0.0;
  double dc_term = 0.0;  // already /(T*F); 0 when alpha == 0 (branch skipped)
  double mi_term = 0.0;  // already /(T*F); 0 when alpha == 1 (branch skipped)
  std::vector<int> permutation;  // speaker assignment chosen by the MI term
  std::optional<Eigen::MatrixXd> grad_v;          // dL/dV
  std::optional<std::vector<Eigen::MatrixXd>> grad_masks;  // dL/dmask_n
};

// alpha * L_DC/(T*F) + (1-alpha) * L_MI/(T*F), where L_MI is the
// permutation-minimal magnitude-spectrum-approximation L2. The
// zero-weighted branch is skipped entirely, not multiplied by zero.
// V/Y may cover a kept-bin subset of the spectrogram; normalization uses
// the full T*F of the mask shapes.
ChimeraLoss chimera_loss(const EmbeddingMatrix& V, const TargetMatrix& Y,
                         const MaskInferenceInputs& mi, double alpha,
                         bool with_gradients = false);

}  // namespace mdc
