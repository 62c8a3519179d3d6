#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mdc/objective.hpp"
#include "mdc/simplex.hpp"

namespace mdc {

using SpecMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic,
                                 Eigen::Dynamic>;  // T x F

// sqrt-Hann analysis/synthesis at 75% overlap. win_len must be a power of
// two and hop must equal win_len / 4.
struct StftConfig {
  int win_len = 256;
  int hop = 64;
  int sample_rate = 8000;

  int n_freqs() const { return win_len / 2 + 1; }
};

enum class SceneKind { DisjointTones, Chirps, OverlappedTones };

SceneKind scene_kind_from_string(const std::string& s);
std::string to_string(SceneKind kind);

// A synthetic mixture with references and the derived spectrogram-domain
// quantities the losses and targets consume.
struct MixtureScene {
  std::vector<double> mixture;
  std::vector<std::vector<double>> sources;  // N signals, same length
  SpecMatrix mix_spec;                       // T x F
  Eigen::MatrixXd mix_mag;                   // T x F
  std::vector<Eigen::MatrixXd> src_mags;     // N matrices, T x F
  std::vector<int> indicator;                // TF labels, bin i = t*F + f
  std::vector<bool> silence_mask;            // TF, true below threshold
  int n_speakers = 0;
  SceneKind kind = SceneKind::DisjointTones;
  int sample_rate = 8000;
  unsigned long long seed = 0;
};

// Analysis. F = win_len/2 + 1 one-sided bins; frames start at multiples of
// hop, windowed by the square root of a periodic Hann window.
SpecMatrix stft(const std::vector<double>& x, const StftConfig& cfg);

// Overlap-add synthesis with the sqrt-Hann synthesis window and COLA
// normalization. istft(stft(x)) reproduces interior samples within 1e-6.
std::vector<double> istft(const SpecMatrix& X, const StftConfig& cfg);

// Sum of squared window overlaps at each interior sample; constant (the
// COLA property) for sqrt-Hann at 75% overlap.
double cola_constant(const StftConfig& cfg);

constexpr double kSilenceThresholdDb = -40.0;

// Deterministic synthetic scene. Sources occupy disjoint random frequency
// bands (DisjointTones), random linear chirps (Chirps), or partially
// overlapping band-limited noise (OverlappedTones); amplitudes randomized
// within +/-2.5 dB.
MixtureScene synth_scene(SceneKind kind, int n_speakers, double duration_s,
                         int sample_rate, unsigned long long seed,
                         const StftConfig& cfg = StftConfig{});

// Recomputes mix_spec, magnitudes, indicator and silence mask from the
// time-domain fields. Used after loading a scene from disk.
void analyze_scene(MixtureScene& scene, const StftConfig& cfg);

// Per-bin targets from the dominant-speaker indicator. When drop_silence,
// bins under the silence threshold are excluded; the returned index list
// maps kept rows to TF positions.
std::pair<TargetMatrix, std::vector<int>> indicator_and_targets(
    const MixtureScene& scene, TargetMode mode, bool drop_silence);

// separated_n = mask_n (elementwise) mix_spec; mixture phase reused.
std::vector<SpecMatrix> apply_masks(const SpecMatrix& mix_spec,
                                    const std::vector<Eigen::MatrixXd>& masks);

// Mono 16-bit PCM WAV I/O. Throws std::runtime_error on malformed files.
std::vector<double> wav_read(const std::string& path, int* sample_rate);
void wav_write(const std::string& path, const std::vector<double>& samples,
               int sample_rate);

// Network input features: log(magnitude + 1e-8), per-utterance
// mean/variance normalized, then context-stacked with edge replication.
// Result is T x (context * F).
Eigen::MatrixXd scene_features(const MixtureScene& scene, int context);

}  // namespace mdc
