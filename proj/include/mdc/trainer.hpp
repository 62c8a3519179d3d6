#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdc/network.hpp"
#include "mdc/objective.hpp"

namespace mdc {

struct TrainConfig {
  double learning_rate = 1e-4;
  double decay_factor = 0.5;
  int plateau_patience = 5;
  int stop_patience = 30;
  int batch_size = 32;
  int max_epochs = 100;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  TargetMode target_mode = TargetMode::OneHot;
  double alpha = 1.0;
  unsigned long long seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

void write_train_log_csv(const TrainLog& log, const std::string& path);

// One training example: a scene reduced to network inputs and loss inputs.
struct TrainExample {
  Eigen::MatrixXd features;      // T x (context * F)
  TargetMatrix targets;          // kept-bin rows
  std::vector<int> kept_bins;    // maps target rows to TF positions
  Eigen::MatrixXd mix_mag;       // T x F
  std::vector<Eigen::MatrixXd> src_mags;  // N matrices T x F (MI term)
};

// Accumulator state for rmsprop; mirrors the parameter structure.
using RmsState = NetworkParams;

RmsState init_rms_state(const NetworkParams& params);

// s' = rho s + (1-rho) g^2; theta' = theta - lr g / (sqrt(s') + eps),
// elementwise. Throws on non-finite gradients.
void rmsprop_step(NetworkParams& params, const ParamGrads& grads,
                  RmsState& state, double lr, double rms_decay,
                  double rms_epsilon);

// Per-scene loss and parameter gradients under the configured objective:
// alpha-weighted DC term over kept bins plus MI term when alpha < 1.
struct SceneLoss {
  double value = 0.0;
  ParamGrads grads;
};

double scene_loss(const NetworkParams& params, const TrainExample& ex,
                  double alpha);
SceneLoss scene_loss_and_grads(const NetworkParams& params,
                               const TrainExample& ex, double alpha);

// Full training loop: seeded shuffling, rmsprop updates, plateau lr decay,
// early stopping, best-validation-epoch parameter selection.
std::pair<NetworkParams, TrainLog> train(const NetworkConfig& net_config,
                                         const TrainConfig& train_config,
                                         const std::vector<TrainExample>& train_set,
                                         const std::vector<TrainExample>& val_set);

}  // namespace mdc
