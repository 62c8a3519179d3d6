#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdc/clustering.hpp"
#include "mdc/network.hpp"
#include "mdc/signal.hpp"
#include "mdc/trainer.hpp"

namespace mdc {

enum class Method { Dc, Mdc, ChimeraDc, ChimeraMdc };

Method method_from_string(const std::string& s);
std::string to_string(Method m);
TargetMode method_target_mode(Method m);
bool method_has_mi_head(Method m);

// Everything a run needs, loadable from a key=value config file.
struct ExperimentConfig {
  Method method = Method::Mdc;
  std::vector<double> alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<unsigned long long> seeds = {0};
  SceneKind scene_kind = SceneKind::DisjointTones;
  int n_speakers = 2;
  double duration_s = 0.5;
  int n_train = 8;
  int n_val = 2;
  int n_eval = 4;
  bool drop_silence = true;
  std::string out_dir = "out";

  NetworkConfig net;       // input_dim is derived from stft
  TrainConfig train;
  StftConfig stft;
  KMeansConfig kmeans;

  void validate() const;
};

// Parses a UTF-8 key=value file: one pair per line, '#' comments, dotted
// keys for sub-configs (e.g. train.batch_size = 32). Unknown keys throw.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// Serializes the config back to the same format (copied into output dirs).
std::string config_to_text(const ExperimentConfig& cfg);

}  // namespace mdc
