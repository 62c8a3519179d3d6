#pragma once

#include <string>
#include <vector>

#include "mdc/config.hpp"
#include "mdc/metrics.hpp"

namespace mdc {

// One row of the evaluation report CSV.
struct ReportRow {
  std::string scene_id;
  Method method = Method::Dc;
  double alpha = 1.0;
  unsigned long long seed = 0;
  int source_idx = 0;
  double si_sdr = 0.0;
  double si_sdr_i = 0.0;
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
  std::string permutation;  // e.g. "1-0"
  std::string mask_source;  // "binary", "ratio", or "oracle"
};

std::string checkpoint_path(const ExperimentConfig& cfg, Method method,
                            double alpha, unsigned long long seed);
std::string report_path(const ExperimentConfig& cfg, Method method,
                        double alpha, unsigned long long seed);

// Generates n_train + n_val + n_eval scene directories under
// <out_dir>/scenes plus a manifest; deterministic per seed.
void cmd_gen_data(const ExperimentConfig& cfg);

// Loads scenes of one split ("train", "val", "eval") back from disk.
std::vector<MixtureScene> load_scenes(const ExperimentConfig& cfg,
                                      const std::string& split);

// Scene -> TrainExample under a method's target mode.
std::vector<TrainExample> make_examples(const std::vector<MixtureScene>& scenes,
                                        const ExperimentConfig& cfg,
                                        TargetMode mode);

// Trains one (method, alpha, seed) cell; writes a checkpoint and TrainLog
// CSV; returns the checkpoint path.
std::string cmd_train(const ExperimentConfig& cfg, Method method, double alpha,
                      unsigned long long seed);

// Evaluates a checkpoint over the eval split and writes the report CSV.
// With oracle = true the network is bypassed and ideal binary masks are
// applied instead.
std::vector<ReportRow> cmd_evaluate(const ExperimentConfig& cfg, Method method,
                                    double alpha, unsigned long long seed,
                                    bool oracle = false);

std::vector<ReportRow> read_report_csv(const std::string& path);
void write_report_csv(const std::vector<ReportRow>& rows,
                      const std::string& path);

// Finite-difference check of the objective gradient and of end-to-end
// parameter gradients on fresh random params.
struct GradCheckResult {
  double objective_max_rel_err = 0.0;
  double network_max_rel_err = 0.0;
  bool passed = false;
};
GradCheckResult cmd_gradcheck(const ExperimentConfig& cfg);

// Aggregates dc vs mdc reports across seeds into a summary CSV; missing
// cells are reported on stderr and skipped.
void cmd_compare(const ExperimentConfig& cfg, const std::string& out_csv);

// Per-(alpha, method, seed) summary rows for the chimera methods.
void cmd_sweep_alpha(const ExperimentConfig& cfg, const std::string& out_csv);

}  // namespace mdc
