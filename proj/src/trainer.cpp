#include "mdc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mdc {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate <= 0");
  if (decay_factor <= 0.0 || decay_factor >= 1.0) {
    throw std::invalid_argument("decay_factor must lie in (0, 1)");
  }
  if (plateau_patience < 1 || stop_patience < 1) {
    throw std::invalid_argument("patience values must be >= 1");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
}

namespace {

// Applies fn to every parameter tensor, pairing across structures.
template <typename Fn>
void zip_tensors(NetworkParams& a, const NetworkParams& b, NetworkParams& c,
                 Fn fn) {
  for (size_t l = 0; l < a.hidden.size(); ++l) {
    fn(a.hidden[l].weight, b.hidden[l].weight, c.hidden[l].weight);
    fn(a.hidden[l].bias, b.hidden[l].bias, c.hidden[l].bias);
  }
  fn(a.dc_head.weight, b.dc_head.weight, c.dc_head.weight);
  fn(a.dc_head.bias, b.dc_head.bias, c.dc_head.bias);
  if (a.config.with_mi_head) {
    fn(a.mi_head.weight, b.mi_head.weight, c.mi_head.weight);
    fn(a.mi_head.bias, b.mi_head.bias, c.mi_head.bias);
  }
}

void accumulate(ParamGrads& into, const ParamGrads& grads, double scale) {
  NetworkParams tmp = grads;  // unused third slot
  zip_tensors(into, grads, tmp, [scale](auto& acc, const auto& g, auto&) {
    acc += scale * g;
  });
}

ParamGrads zeros_like(const NetworkParams& params) {
  ParamGrads z = params;
  for (auto& l : z.hidden) {
    l.weight.setZero();
    l.bias.setZero();
  }
  z.dc_head.weight.setZero();
  z.dc_head.bias.setZero();
  if (z.config.with_mi_head) {
    z.mi_head.weight.setZero();
    z.mi_head.bias.setZero();
  }
  return z;
}

ChimeraLoss eval_scene(const NetworkParams& params, const TrainExample& ex,
                       double alpha, bool with_grads, ForwardResult* fwd_out) {
  ForwardResult fwd = forward(params, ex.features);
  const int n_kept = static_cast<int>(ex.kept_bins.size());
  EmbeddingMatrix V;
  if (alpha > 0.0) {
    V.data.resize(n_kept, fwd.embeddings.dim);
    for (int i = 0; i < n_kept; ++i) {
      V.data.row(i) = fwd.embeddings.data.row(ex.kept_bins[i]);
    }
    V.n_frames = fwd.embeddings.n_frames;
    V.n_freqs = fwd.embeddings.n_freqs;
    V.dim = fwd.embeddings.dim;
  }
  MaskInferenceInputs mi;
  mi.mix_mag = ex.mix_mag;
  if (alpha < 1.0) {
    mi.masks = fwd.masks;
    mi.src_mags = ex.src_mags;
  } else {
    mi.src_mags = ex.src_mags;  // shapes only; MI branch is skipped
  }
  ChimeraLoss loss = chimera_loss(V, ex.targets, mi, alpha, with_grads);
  if (fwd_out) *fwd_out = std::move(fwd);
  return loss;
}

}  // namespace

RmsState init_rms_state(const NetworkParams& params) {
  return zeros_like(params);
}

void rmsprop_step(NetworkParams& params, const ParamGrads& grads,
                  RmsState& state, double lr, double rms_decay,
                  double rms_epsilon) {
  bool finite = true;
  NetworkParams g_copy = grads;
  zip_tensors(g_copy, grads, g_copy, [&finite](auto& g, const auto&, auto&) {
    if (!g.allFinite()) finite = false;
  });
  if (!finite) {
    throw std::runtime_error("rmsprop_step: non-finite gradients");
  }
  zip_tensors(params, grads, state,
              [lr, rms_decay, rms_epsilon](auto& theta, const auto& g,
                                           auto& s) {
                s.array() = rms_decay * s.array() +
                            (1.0 - rms_decay) * g.array().square();
                theta.array() -=
                    lr * g.array() / (s.array().sqrt() + rms_epsilon);
              });
}

double scene_loss(const NetworkParams& params, const TrainExample& ex,
                  double alpha) {
  return eval_scene(params, ex, alpha, false, nullptr).value;
}

SceneLoss scene_loss_and_grads(const NetworkParams& params,
                               const TrainExample& ex, double alpha) {
  ForwardResult fwd;
  const ChimeraLoss loss = eval_scene(params, ex, alpha, true, &fwd);

  // Scatter kept-bin embedding gradients into the full TF x D matrix.
  Eigen::MatrixXd grad_v = Eigen::MatrixXd::Zero(fwd.embeddings.data.rows(),
                                                 fwd.embeddings.data.cols());
  if (alpha > 0.0 && loss.grad_v) {
    for (size_t i = 0; i < ex.kept_bins.size(); ++i) {
      grad_v.row(ex.kept_bins[i]) = loss.grad_v->row(static_cast<int>(i));
    }
  }
  SceneLoss out;
  out.value = loss.value;
  out.grads = backward(params, ex.features, fwd, grad_v,
                       loss.grad_masks ? &*loss.grad_masks : nullptr);
  return out;
}

std::pair<NetworkParams, TrainLog> train(
    const NetworkConfig& net_config, const TrainConfig& train_config,
    const std::vector<TrainExample>& train_set,
    const std::vector<TrainExample>& val_set) {
  train_config.validate();
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train: datasets must be non-empty");
  }

  NetworkParams params = init_params(net_config);
  RmsState state = init_rms_state(params);
  TrainLog log;
  if (train_config.max_epochs == 0) return {params, log};

  NetworkParams best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  double lr = train_config.learning_rate;
  int since_improvement = 0;
  int since_plateau_reset = 0;

  std::mt19937_64 shuffler(train_config.seed);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  auto mean_val_loss = [&](const NetworkParams& p) {
    double total = 0.0;
    for (const auto& ex : val_set) {
      total += scene_loss(p, ex, train_config.alpha);
    }
    return total / static_cast<double>(val_set.size());
  };

  for (int epoch = 0; epoch < train_config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffler);

    double train_total = 0.0;
    for (size_t start = 0; start < order.size();
         start += train_config.batch_size) {
      const size_t end =
          std::min(order.size(), start + train_config.batch_size);
      ParamGrads batch_grads = zeros_like(params);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (size_t i = start; i < end; ++i) {
        SceneLoss sl =
            scene_loss_and_grads(params, train_set[order[i]],
                                 train_config.alpha);
        if (!std::isfinite(sl.value)) {
          throw std::runtime_error("non-finite loss at epoch " +
                                   std::to_string(epoch) + ", scene " +
                                   std::to_string(order[i]));
        }
        train_total += sl.value;
        accumulate(batch_grads, sl.grads, inv);
      }
      rmsprop_step(params, batch_grads, state, lr, train_config.rms_decay,
                   train_config.rms_epsilon);
    }

    const double val_loss = mean_val_loss(params);
    const auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_total / static_cast<double>(train_set.size());
    rec.val_loss = val_loss;
    rec.learning_rate = lr;
    rec.seconds = std::chrono::duration<double>(t1 - t0).count();
    log.epochs.push_back(rec);

    if (val_loss < best_val - 1e-12) {
      best_val = val_loss;
      best_params = params;
      since_improvement = 0;
      since_plateau_reset = 0;
    } else {
      ++since_improvement;
      ++since_plateau_reset;
      if (since_improvement >= train_config.stop_patience) break;
      if (since_plateau_reset >= train_config.plateau_patience) {
        lr *= train_config.decay_factor;
        since_plateau_reset = 0;
      }
    }
  }
  return {best_params, log};
}

void write_train_log_csv(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train log: " + path);
  out << "epoch,train_loss,val_loss,lr,seconds\n";
  for (const auto& r : log.epochs) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ','
        << r.learning_rate << ',' << r.seconds << '\n';
  }
}

}  // namespace mdc
