#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "mdc/metrics.hpp"
#include "mdc/signal.hpp"

using namespace mdc;

namespace {
const StftConfig kCfg{};  // 256/64, 8 kHz

std::vector<double> white_noise(int len, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  std::vector<double> x(len);
  for (auto& v : x) v = dist(rng);
  return x;
}
}  // namespace

TEST_CASE("COLA constant is flat over interior samples") {
  // Accumulate w^2 overlaps over a long stretch and check flatness.
  const int W = kCfg.win_len, H = kCfg.hop;
  std::vector<double> acc(W * 8, 0.0);
  std::vector<double> w(W);
  for (int n = 0; n < W; ++n) {
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / W));
  }
  for (int off = 0; off + W <= static_cast<int>(acc.size()); off += H) {
    for (int n = 0; n < W; ++n) acc[off + n] += w[n] * w[n];
  }
  const double c = cola_constant(kCfg);
  for (int n = W; n + W < static_cast<int>(acc.size()); ++n) {
    CHECK(std::abs(acc[n] - c) < 1e-10);
  }
  CHECK(c == doctest::Approx(2.0).epsilon(1e-12));  // sqrt-Hann at 75%
}

TEST_CASE("stft of a bin-centered sine concentrates its energy") {
  const int k = 20;
  const double f = static_cast<double>(k) * kCfg.sample_rate / kCfg.win_len;
  std::vector<double> x(8000);
  for (size_t n = 0; n < x.size(); ++n) {
    x[n] = std::sin(2.0 * std::numbers::pi * f * n / kCfg.sample_rate);
  }
  const SpecMatrix X = stft(x, kCfg);
  // Interior frame: energy in bin k dominates.
  const int t = static_cast<int>(X.rows()) / 2;
  double total = 0.0;
  int argmax = 0;
  for (int b = 0; b < X.cols(); ++b) {
    total += std::norm(X(t, b));
    if (std::norm(X(t, b)) > std::norm(X(t, argmax))) argmax = b;
  }
  CHECK(argmax == k);
  // The sqrt-Hann window's sidelobes decay slowly; the main lobe spans
  // roughly three bins.
  const double lobe =
      std::norm(X(t, k - 1)) + std::norm(X(t, k)) + std::norm(X(t, k + 1));
  CHECK(lobe / total > 0.95);
}

TEST_CASE("stft of zeros is zero; short input rejected") {
  std::vector<double> zeros(4096, 0.0);
  const SpecMatrix X = stft(zeros, kCfg);
  CHECK(X.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(stft(std::vector<double>(100, 0.0), kCfg),
                  std::invalid_argument);
}

TEST_CASE("istft(stft(x)) reproduces interior samples") {
  const auto x = white_noise(8000, 99);
  const auto y = istft(stft(x, kCfg), kCfg);
  REQUIRE(y.size() <= x.size());
  double max_err = 0.0;
  for (size_t n = kCfg.win_len; n + kCfg.win_len < y.size(); ++n) {
    max_err = std::max(max_err, std::abs(y[n] - x[n]));
  }
  CHECK(max_err < 1e-6);
}

TEST_CASE("istft is linear and maps zeros to zeros") {
  const auto a = stft(white_noise(4096, 1), kCfg);
  const auto b = stft(white_noise(4096, 2), kCfg);
  const auto ya = istft(a, kCfg);
  const auto yb = istft(b, kCfg);
  const auto ysum = istft(a + b, kCfg);
  for (size_t n = 0; n < ysum.size(); ++n) {
    CHECK(std::abs(ysum[n] - (ya[n] + yb[n])) < 1e-9);
  }
  const SpecMatrix z = SpecMatrix::Zero(30, kCfg.n_freqs());
  for (double v : istft(z, kCfg)) CHECK(v == 0.0);
}

TEST_CASE("Parseval-style energy relation for sqrt-Hann at 75% overlap") {
  // Sum over frames of the DFT Parseval identity: total one-sided spectral
  // energy equals win_len * sum_n overlap(n) * x[n]^2, where overlap(n) is
  // the accumulated squared window (the COLA constant on the interior).
  const auto x = white_noise(8192, 5);
  const SpecMatrix X = stft(x, kCfg);
  double spec_energy = 0.0;
  for (int t = 0; t < X.rows(); ++t) {
    for (int f = 0; f < X.cols(); ++f) {
      const double e = std::norm(X(t, f));
      // One-sided: interior bins count twice.
      spec_energy += (f == 0 || f == kCfg.win_len / 2) ? e : 2.0 * e;
    }
  }
  const int W = kCfg.win_len;
  std::vector<double> w(W), overlap(x.size(), 0.0);
  for (int n = 0; n < W; ++n) {
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / W));
  }
  for (int t = 0; t < X.rows(); ++t) {
    for (int n = 0; n < W; ++n) overlap[t * kCfg.hop + n] += w[n] * w[n];
  }
  double weighted_energy = 0.0;
  double interior_consistency = 0.0;
  for (size_t n = 0; n < x.size(); ++n) {
    weighted_energy += overlap[n] * x[n] * x[n];
    if (n >= static_cast<size_t>(W) && n + W < x.size()) {
      interior_consistency =
          std::max(interior_consistency,
                   std::abs(overlap[n] - cola_constant(kCfg)));
    }
  }
  const double expected = W * weighted_energy;
  CHECK(std::abs(spec_energy - expected) / expected < 1e-6);
  CHECK(interior_consistency < 1e-10);
}

TEST_CASE("synth_scene determinism and mixture identity") {
  for (SceneKind kind : {SceneKind::DisjointTones, SceneKind::Chirps,
                         SceneKind::OverlappedTones}) {
    const MixtureScene a = synth_scene(kind, 2, 0.5, 8000, 77);
    const MixtureScene b = synth_scene(kind, 2, 0.5, 8000, 77);
    const MixtureScene c = synth_scene(kind, 2, 0.5, 8000, 78);
    CHECK(a.mixture == b.mixture);
    CHECK(a.mixture != c.mixture);
    for (size_t n = 0; n < a.mixture.size(); ++n) {
      double sum = 0.0;
      for (const auto& src : a.sources) sum += src[n];
      CHECK(a.mixture[n] == doctest::Approx(sum).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(synth_scene(SceneKind::Chirps, 4, 1.0, 8000, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(synth_scene(SceneKind::Chirps, 2, 0.1, 8000, 0),
                  std::invalid_argument);
}

TEST_CASE("ideal binary masks separate disjoint tones above 20 dB") {
  const MixtureScene scene =
      synth_scene(SceneKind::DisjointTones, 2, 1.0, 8000, 123);
  const int T = static_cast<int>(scene.mix_mag.rows());
  const int F = static_cast<int>(scene.mix_mag.cols());
  std::vector<int> all_bins(scene.indicator.size());
  for (size_t i = 0; i < all_bins.size(); ++i) all_bins[i] = static_cast<int>(i);

  std::vector<Eigen::MatrixXd> masks(2, Eigen::MatrixXd::Zero(T, F));
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      masks[scene.indicator[t * F + f]](t, f) = 1.0;
    }
  }
  const auto separated = apply_masks(scene.mix_spec, masks);
  for (int s = 0; s < 2; ++s) {
    const auto est = istft(separated[s], kCfg);
    std::vector<double> ref(scene.sources[s].begin(),
                            scene.sources[s].begin() + est.size());
    CHECK(si_sdr(est, ref) > 20.0);
  }
}

TEST_CASE("indicator is permutation-equivariant") {
  MixtureScene scene = synth_scene(SceneKind::OverlappedTones, 2, 0.5, 8000, 5);
  MixtureScene swapped = scene;
  std::swap(swapped.sources[0], swapped.sources[1]);
  analyze_scene(swapped, kCfg);
  for (size_t i = 0; i < scene.indicator.size(); ++i) {
    CHECK(swapped.indicator[i] == 1 - scene.indicator[i]);
  }
}

TEST_CASE("indicator_and_targets modes and silence dropping") {
  MixtureScene scene = synth_scene(SceneKind::DisjointTones, 2, 0.5, 8000, 9);
  auto [onehot, kept1] = indicator_and_targets(scene, TargetMode::OneHot, false);
  CHECK(kept1.size() == scene.indicator.size());
  for (Eigen::Index i = 0; i < onehot.data.rows(); ++i) {
    CHECK(onehot.data.row(i).sum() == 1.0);
    CHECK(onehot.data.row(i).maxCoeff() == 1.0);
  }
  auto [simplex, kept2] = indicator_and_targets(scene, TargetMode::Simplex, false);
  for (Eigen::Index i = 0; i < simplex.data.rows(); ++i) {
    CHECK(std::abs(std::abs(simplex.data(i, 0)) - 0.7071068) < 1e-6);
    CHECK(simplex.data(i, 0) == doctest::Approx(-simplex.data(i, 1)));
  }
  // Leading silence forces dropped bins.
  MixtureScene quiet = scene;
  const int lead = 4000;  // 0.5 s of silence at 8 kHz
  for (auto& src : quiet.sources) {
    src.insert(src.begin(), lead, 0.0);
  }
  quiet.mixture.insert(quiet.mixture.begin(), lead, 0.0);
  analyze_scene(quiet, kCfg);
  auto [targets, kept] = indicator_and_targets(quiet, TargetMode::OneHot, true);
  CHECK(kept.size() < quiet.indicator.size());
  CHECK(targets.data.rows() == static_cast<Eigen::Index>(kept.size()));
}

TEST_CASE("apply_masks identities") {
  const MixtureScene scene = synth_scene(SceneKind::Chirps, 2, 0.5, 8000, 21);
  const int T = static_cast<int>(scene.mix_mag.rows());
  const int F = static_cast<int>(scene.mix_mag.cols());
  SUBCASE("all-ones mask passes the mixture through") {
    std::vector<Eigen::MatrixXd> masks = {Eigen::MatrixXd::Ones(T, F),
                                          Eigen::MatrixXd::Zero(T, F)};
    const auto out = apply_masks(scene.mix_spec, masks);
    CHECK((out[0] - scene.mix_spec).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out[1].cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("masks summing to one partition the mixture") {
    std::vector<Eigen::MatrixXd> masks = {
        Eigen::MatrixXd::Constant(T, F, 0.3),
        Eigen::MatrixXd::Constant(T, F, 0.7)};
    const auto out = apply_masks(scene.mix_spec, masks);
    CHECK((out[0] + out[1] - scene.mix_spec).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("shape mismatch rejected") {
    std::vector<Eigen::MatrixXd> bad = {Eigen::MatrixXd::Ones(T + 1, F)};
    CHECK_THROWS_AS(apply_masks(scene.mix_spec, bad), std::invalid_argument);
  }
}

TEST_CASE("WAV round-trip at 16-bit quantization") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "mdc_wav_test";
  fs::create_directories(dir);
  const auto path = (dir / "t.wav").string();
  const auto x = white_noise(3000, 4);
  wav_write(path, x, 8000);
  int rate = 0;
  const auto y = wav_read(path, &rate);
  CHECK(rate == 8000);
  REQUIRE(y.size() == x.size());
  for (size_t n = 0; n < x.size(); ++n) {
    CHECK(std::abs(y[n] - x[n]) <= 0.5 / 32768.0 + 1e-12);
  }
  // Re-writing read samples is exact (already quantized).
  wav_write(path, y, 8000);
  const auto z = wav_read(path, &rate);
  CHECK(z == y);
  // Malformed header.
  {
    std::ofstream bad(dir / "bad.wav", std::ios::binary);
    bad << "not a wav";
  }
  CHECK_THROWS_AS(wav_read((dir / "bad.wav").string(), nullptr),
                  std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("scene features are normalized and context-stacked") {
  const MixtureScene scene = synth_scene(SceneKind::Chirps, 2, 0.5, 8000, 31);
  const Eigen::MatrixXd feat = scene_features(scene, 3);
  const int F = static_cast<int>(scene.mix_mag.cols());
  CHECK(feat.cols() == 3 * F);
  CHECK(std::abs(feat.block(0, F, feat.rows(), F).mean()) < 0.2);
  // Center slab of frame t equals left slab of frame t+1.
  CHECK((feat.block(1, 0, 1, F) - feat.block(0, F, 1, F)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK_THROWS_AS(scene_features(scene, 2), std::invalid_argument);
}
