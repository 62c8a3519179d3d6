#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdc/objective.hpp"

namespace mdc {

enum class Activation { Tanh, Relu };

// Feedforward embedding network over a context window of frames. The DC
// head emits D values per TF bin (row-normalized); the optional MI head
// emits a per-bin softmax over speakers.
struct NetworkConfig {
  int input_dim = 129;               // F
  int context = 5;                   // odd; input width = context * F
  std::vector<int> hidden = {128, 128};
  int embedding_dim = 40;            // D
  int n_speakers = 2;                // N
  bool with_mi_head = false;
  Activation activation = Activation::Tanh;
  unsigned long long seed = 0;

  void validate() const;
};

// Dense layer parameters; weights are (in x out).
struct Layer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct NetworkParams {
  NetworkConfig config;
  std::vector<Layer> hidden;  // one per hidden width
  Layer dc_head;              // out = F * D
  Layer mi_head;              // out = F * N, present iff with_mi_head
};

// Gradients mirror the parameter structure.
using ParamGrads = NetworkParams;

// Deterministic Glorot-uniform initialization from the config seed.
NetworkParams init_params(const NetworkConfig& cfg);

// Forward pass with cached intermediates for the backward pass.
struct ForwardResult {
  EmbeddingMatrix embeddings;                       // TF x D, unit rows
  std::vector<Eigen::MatrixXd> masks;               // N matrices T x F
  // Caches:
  std::vector<Eigen::MatrixXd> hidden_acts;         // input + each hidden out
  Eigen::MatrixXd dc_raw;                           // T x (F*D), pre-norm
  Eigen::VectorXd row_norms;                        // TF, epsilon-floored
  Eigen::MatrixXd mi_raw;                           // T x (F*N), pre-softmax
};

ForwardResult forward(const NetworkParams& params,
                      const Eigen::MatrixXd& features);

// Exact backprop through both heads, including the row-normalization
// Jacobian (I - vv')/||z|| and the per-bin softmax Jacobian. grad_v is
// TF x D over all bins (zero rows for bins outside the loss); grad_masks,
// when given, has one T x F matrix per speaker.
ParamGrads backward(const NetworkParams& params,
                    const Eigen::MatrixXd& features, const ForwardResult& fwd,
                    const Eigen::MatrixXd& grad_v,
                    const std::vector<Eigen::MatrixXd>* grad_masks = nullptr);

// Flat binary checkpoint: magic "SPXE", version, config block, per-layer
// float64 arrays row-major little-endian.
void save_params(const NetworkParams& params, const std::string& path);
NetworkParams load_params(const std::string& path);

}  // namespace mdc
