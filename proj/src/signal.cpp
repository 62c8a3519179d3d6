#include "mdc/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mdc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void check_cfg(const StftConfig& cfg) {
  if (!is_pow2(cfg.win_len)) {
    throw std::invalid_argument("win_len must be a power of two");
  }
  if (cfg.hop <= 0 || cfg.win_len % cfg.hop != 0 ||
      cfg.win_len / cfg.hop != 4) {
    throw std::invalid_argument("hop must equal win_len / 4 (75% overlap)");
  }
}

// sqrt of the periodic Hann window.
std::vector<double> sqrt_hann(int win_len) {
  std::vector<double> w(win_len);
  for (int n = 0; n < win_len; ++n) {
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(kTwoPi * n / win_len));
  }
  return w;
}

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

}  // namespace

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "disjoint_tones") return SceneKind::DisjointTones;
  if (s == "chirps") return SceneKind::Chirps;
  if (s == "overlapped_tones") return SceneKind::OverlappedTones;
  throw std::invalid_argument("unknown scene kind: " + s);
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::DisjointTones: return "disjoint_tones";
    case SceneKind::Chirps: return "chirps";
    case SceneKind::OverlappedTones: return "overlapped_tones";
  }
  return "?";
}

SpecMatrix stft(const std::vector<double>& x, const StftConfig& cfg) {
  check_cfg(cfg);
  const int W = cfg.win_len;
  if (static_cast<int>(x.size()) < W) {
    throw std::invalid_argument("input shorter than one analysis window");
  }
  const int T = static_cast<int>((x.size() - W) / cfg.hop) + 1;
  const int F = cfg.n_freqs();
  const std::vector<double> w = sqrt_hann(W);

  SpecMatrix X(T, F);
  std::vector<std::complex<double>> buf(W);
  for (int t = 0; t < T; ++t) {
    const int off = t * cfg.hop;
    for (int n = 0; n < W; ++n) {
      buf[n] = std::complex<double>(x[off + n] * w[n], 0.0);
    }
    fft_inplace(buf, false);
    for (int f = 0; f < F; ++f) X(t, f) = buf[f];
  }
  return X;
}

std::vector<double> istft(const SpecMatrix& X, const StftConfig& cfg) {
  check_cfg(cfg);
  const int W = cfg.win_len;
  const int F = cfg.n_freqs();
  if (X.cols() != F) {
    throw std::invalid_argument("spectrogram column count does not match cfg");
  }
  const int T = static_cast<int>(X.rows());
  const std::vector<double> w = sqrt_hann(W);

  const size_t out_len = static_cast<size_t>(T - 1) * cfg.hop + W;
  std::vector<double> num(out_len, 0.0), den(out_len, 0.0);
  std::vector<std::complex<double>> buf(W);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) buf[f] = X(t, f);
    for (int f = F; f < W; ++f) buf[f] = std::conj(X(t, W - f));
    fft_inplace(buf, true);
    const int off = t * cfg.hop;
    for (int n = 0; n < W; ++n) {
      num[off + n] += buf[n].real() * w[n];
      den[off + n] += w[n] * w[n];
    }
  }
  std::vector<double> y(out_len);
  for (size_t n = 0; n < out_len; ++n) {
    y[n] = num[n] / std::max(den[n], 1e-12);
  }
  return y;
}

double cola_constant(const StftConfig& cfg) {
  check_cfg(cfg);
  const std::vector<double> w = sqrt_hann(cfg.win_len);
  // Overlap sum at one interior sample; COLA makes it position-independent.
  double s = 0.0;
  for (int j = 0; j < cfg.win_len; j += cfg.hop) {
    s += w[j] * w[j];
  }
  return s;
}

MixtureScene synth_scene(SceneKind kind, int n_speakers, double duration_s,
                         int sample_rate, unsigned long long seed,
                         const StftConfig& cfg) {
  if (n_speakers != 2 && n_speakers != 3) {
    throw std::invalid_argument("synth_scene supports 2 or 3 speakers");
  }
  if (duration_s < 0.5) {
    throw std::invalid_argument("scene duration must be at least 0.5 s");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int len = static_cast<int>(std::lround(duration_s * sample_rate));
  const int W = cfg.win_len;
  const int F = cfg.n_freqs();
  // Usable bin range avoids DC and Nyquist.
  const int lo_bin = 2;
  const int hi_bin = F - 2;
  const int band = (hi_bin - lo_bin) / n_speakers;

  auto gain_db = [&]() { return std::pow(10.0, (unit(rng) * 5.0 - 2.5) / 20.0); };
  auto bin_freq = [&](int k) {
    return static_cast<double>(k) * sample_rate / W;
  };

  MixtureScene scene;
  scene.n_speakers = n_speakers;
  scene.kind = kind;
  scene.sample_rate = sample_rate;
  scene.seed = seed;
  scene.sources.assign(n_speakers, std::vector<double>(len, 0.0));

  for (int s = 0; s < n_speakers; ++s) {
    auto& src = scene.sources[s];
    const double g = 0.2 * gain_db();
    if (kind == SceneKind::DisjointTones) {
      // Speaker s owns the s-th partition of the usable bins.
      const int plo = lo_bin + s * band;
      const int phi = plo + band;
      const int n_tones = 2 + static_cast<int>(unit(rng) * 2.0);  // 2..3
      for (int tone = 0; tone < n_tones; ++tone) {
        const int k = plo + static_cast<int>(unit(rng) * (phi - plo));
        const double f = bin_freq(std::min(k, phi - 1));
        const double phase = unit(rng) * kTwoPi;
        const double a = g / n_tones * gain_db();
        for (int n = 0; n < len; ++n) {
          src[n] += a * std::sin(kTwoPi * f * n / sample_rate + phase);
        }
      }
    } else if (kind == SceneKind::Chirps) {
      const int n_chirps = 1 + static_cast<int>(unit(rng) * 2.0);  // 1..2
      for (int c = 0; c < n_chirps; ++c) {
        const double f0 = bin_freq(lo_bin) +
                          unit(rng) * (bin_freq(hi_bin) - bin_freq(lo_bin));
        const double f1 = bin_freq(lo_bin) +
                          unit(rng) * (bin_freq(hi_bin) - bin_freq(lo_bin));
        const double phase = unit(rng) * kTwoPi;
        const double a = g / n_chirps * gain_db();
        for (int n = 0; n < len; ++n) {
          const double u = static_cast<double>(n) / len;
          const double f = f0 + (f1 - f0) * u * 0.5;  // instantaneous mean
          src[n] += a * std::sin(kTwoPi * f * n / sample_rate + phase);
        }
      }
    } else {  // OverlappedTones: band-limited noise, adjacent bands overlap
      const double step = static_cast<double>(hi_bin - lo_bin) / (n_speakers + 1);
      const int plo = lo_bin + static_cast<int>(s * step);
      const int phi = std::min(hi_bin, lo_bin + static_cast<int>((s + 2) * step));
      const int n_comp = 32;
      for (int c = 0; c < n_comp; ++c) {
        const double f = bin_freq(plo) + unit(rng) * (bin_freq(phi) - bin_freq(plo));
        const double phase = unit(rng) * kTwoPi;
        const double a = g / n_comp * (0.5 + unit(rng));
        for (int n = 0; n < len; ++n) {
          src[n] += a * std::sin(kTwoPi * f * n / sample_rate + phase);
        }
      }
    }
  }

  scene.mixture.assign(len, 0.0);
  for (int s = 0; s < n_speakers; ++s) {
    for (int n = 0; n < len; ++n) scene.mixture[n] += scene.sources[s][n];
  }
  analyze_scene(scene, cfg);
  return scene;
}

void analyze_scene(MixtureScene& scene, const StftConfig& cfg) {
  scene.mix_spec = stft(scene.mixture, cfg);
  scene.mix_mag = scene.mix_spec.cwiseAbs();
  scene.src_mags.clear();
  for (const auto& src : scene.sources) {
    scene.src_mags.push_back(stft(src, cfg).cwiseAbs());
  }
  const int T = static_cast<int>(scene.mix_spec.rows());
  const int F = static_cast<int>(scene.mix_spec.cols());
  const int N = static_cast<int>(scene.sources.size());
  scene.n_speakers = N;
  scene.indicator.assign(static_cast<size_t>(T) * F, 0);
  scene.silence_mask.assign(static_cast<size_t>(T) * F, false);
  const double thresh =
      scene.mix_mag.maxCoeff() * std::pow(10.0, kSilenceThresholdDb / 20.0);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      int best = 0;
      for (int n = 1; n < N; ++n) {
        if (scene.src_mags[n](t, f) > scene.src_mags[best](t, f)) best = n;
      }
      scene.indicator[static_cast<size_t>(t) * F + f] = best;
      scene.silence_mask[static_cast<size_t>(t) * F + f] =
          scene.mix_mag(t, f) < thresh;
    }
  }
}

std::pair<TargetMatrix, std::vector<int>> indicator_and_targets(
    const MixtureScene& scene, TargetMode mode, bool drop_silence) {
  std::vector<int> kept;
  std::vector<int> labels;
  const size_t tf = scene.indicator.size();
  kept.reserve(tf);
  labels.reserve(tf);
  for (size_t i = 0; i < tf; ++i) {
    if (drop_silence && scene.silence_mask[i]) continue;
    kept.push_back(static_cast<int>(i));
    labels.push_back(scene.indicator[i]);
  }
  return {make_targets(labels, scene.n_speakers, mode), std::move(kept)};
}

std::vector<SpecMatrix> apply_masks(const SpecMatrix& mix_spec,
                                    const std::vector<Eigen::MatrixXd>& masks) {
  std::vector<SpecMatrix> out;
  out.reserve(masks.size());
  for (const auto& m : masks) {
    if (m.rows() != mix_spec.rows() || m.cols() != mix_spec.cols()) {
      throw std::invalid_argument("mask shape does not match spectrogram");
    }
    out.push_back(mix_spec.cwiseProduct(m.cast<std::complex<double>>()));
  }
  return out;
}

// ---- WAV I/O: RIFF/WAVE, PCM 16-bit little-endian mono ----

namespace {
uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}
uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
void write_u32(std::ostream& out, uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}
void write_u16(std::ostream& out, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}
}  // namespace

std::vector<double> wav_read(const std::string& path, int* sample_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file: " + path);
  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) {
    throw std::runtime_error("not a RIFF file: " + path);
  }
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) {
    throw std::runtime_error("not a WAVE file: " + path);
  }
  bool got_fmt = false;
  uint16_t channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<double> samples;
  while (in.read(tag, 4)) {
    const uint32_t chunk_size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const uint16_t format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      if (format != 1 || channels != 1 || bits != 16) {
        throw std::runtime_error("WAV must be mono 16-bit PCM: " + path);
      }
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw std::runtime_error("data chunk before fmt: " + path);
      const uint32_t n = chunk_size / 2;
      samples.resize(n);
      for (uint32_t i = 0; i < n; ++i) {
        const uint16_t u = read_u16(in);
        samples[i] = static_cast<int16_t>(u) / 32768.0;
      }
      if (sample_rate) *sample_rate = static_cast<int>(rate);
      return samples;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw std::runtime_error("WAV has no data chunk: " + path);
}

void wav_write(const std::string& path, const std::vector<double>& samples,
               int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write WAV file: " + path);
  const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(sample_rate));
  write_u32(out, static_cast<uint32_t>(sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (double s : samples) {
    const double clamped = std::clamp(s, -1.0, 32767.0 / 32768.0);
    write_u16(out, static_cast<uint16_t>(
                       static_cast<int16_t>(std::lround(clamped * 32768.0))));
  }
  if (!out) throw std::runtime_error("short write: " + path);
}

Eigen::MatrixXd scene_features(const MixtureScene& scene, int context) {
  if (context < 1 || context % 2 == 0) {
    throw std::invalid_argument("context must be a positive odd number");
  }
  const int T = static_cast<int>(scene.mix_mag.rows());
  const int F = static_cast<int>(scene.mix_mag.cols());
  Eigen::MatrixXd logmag =
      (scene.mix_mag.array() + 1e-8).log().matrix();
  const double mean = logmag.mean();
  const double var =
      (logmag.array() - mean).square().sum() / logmag.size();
  logmag = ((logmag.array() - mean) / std::sqrt(var + 1e-12)).matrix();

  const int half = context / 2;
  Eigen::MatrixXd feat(T, context * F);
  for (int t = 0; t < T; ++t) {
    for (int c = -half; c <= half; ++c) {
      const int src = std::clamp(t + c, 0, T - 1);
      feat.block(t, (c + half) * F, 1, F) = logmag.row(src);
    }
  }
  return feat;
}

}  // namespace mdc
