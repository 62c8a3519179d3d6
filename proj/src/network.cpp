#include "mdc/network.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace mdc {

void NetworkConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (context < 1 || context % 2 == 0) {
    throw std::invalid_argument("context must be odd and >= 1");
  }
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("hidden widths must be >= 1");
  }
  if (n_speakers < 2) throw std::invalid_argument("n_speakers must be >= 2");
  if (embedding_dim < n_speakers - 1) {
    throw std::invalid_argument(
        "embedding_dim must be >= n_speakers - 1 to admit the simplex");
  }
}

namespace {

constexpr double kNormFloor = 1e-12;

Layer init_layer(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double lim = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-lim, lim);
  Layer l;
  l.weight.resize(fan_in, fan_out);
  for (int i = 0; i < fan_in; ++i) {
    for (int j = 0; j < fan_out; ++j) l.weight(i, j) = dist(rng);
  }
  l.bias = Eigen::VectorXd::Zero(fan_out);
  return l;
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& pre, Activation act) {
  if (act == Activation::Tanh) return pre.array().tanh().matrix();
  return pre.cwiseMax(0.0);
}

// Derivative expressed through the activation output.
Eigen::ArrayXXd activation_grad(const Eigen::MatrixXd& out, Activation act) {
  if (act == Activation::Tanh) return 1.0 - out.array().square();
  return (out.array() > 0.0).cast<double>();
}

}  // namespace

NetworkParams init_params(const NetworkConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  NetworkParams p;
  p.config = cfg;
  int in = cfg.input_dim * cfg.context;
  for (int w : cfg.hidden) {
    p.hidden.push_back(init_layer(in, w, rng));
    in = w;
  }
  p.dc_head = init_layer(in, cfg.input_dim * cfg.embedding_dim, rng);
  if (cfg.with_mi_head) {
    p.mi_head = init_layer(in, cfg.input_dim * cfg.n_speakers, rng);
  }
  return p;
}

ForwardResult forward(const NetworkParams& params,
                      const Eigen::MatrixXd& features) {
  const NetworkConfig& cfg = params.config;
  const int F = cfg.input_dim;
  const int D = cfg.embedding_dim;
  const int N = cfg.n_speakers;
  if (features.cols() != static_cast<Eigen::Index>(F) * cfg.context) {
    throw std::invalid_argument("feature width does not match config");
  }
  const int T = static_cast<int>(features.rows());

  ForwardResult res;
  res.hidden_acts.push_back(features);
  Eigen::MatrixXd h = features;
  for (const Layer& l : params.hidden) {
    h = activate((h * l.weight).rowwise() + l.bias.transpose(),
                 cfg.activation);
    if (!h.allFinite()) {
      throw std::runtime_error("non-finite activations in forward pass");
    }
    res.hidden_acts.push_back(h);
  }

  res.dc_raw = (h * params.dc_head.weight).rowwise() +
               params.dc_head.bias.transpose();
  res.embeddings.data.resize(static_cast<Eigen::Index>(T) * F, D);
  res.embeddings.n_frames = T;
  res.embeddings.n_freqs = F;
  res.embeddings.dim = D;
  res.row_norms.resize(static_cast<Eigen::Index>(T) * F);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      const auto z = res.dc_raw.row(t).segment(f * D, D);
      const double norm = std::max(z.norm(), kNormFloor);
      res.row_norms(static_cast<Eigen::Index>(t) * F + f) = norm;
      res.embeddings.data.row(static_cast<Eigen::Index>(t) * F + f) = z / norm;
    }
  }

  if (cfg.with_mi_head) {
    res.mi_raw = (h * params.mi_head.weight).rowwise() +
                 params.mi_head.bias.transpose();
    res.masks.assign(N, Eigen::MatrixXd(T, F));
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < F; ++f) {
        const auto a = res.mi_raw.row(t).segment(f * N, N);
        const double mx = a.maxCoeff();
        Eigen::VectorXd e = (a.array() - mx).exp();
        e /= e.sum();
        for (int n = 0; n < N; ++n) res.masks[n](t, f) = e(n);
      }
    }
  }
  return res;
}

ParamGrads backward(const NetworkParams& params,
                    const Eigen::MatrixXd& features, const ForwardResult& fwd,
                    const Eigen::MatrixXd& grad_v,
                    const std::vector<Eigen::MatrixXd>* grad_masks) {
  const NetworkConfig& cfg = params.config;
  const int F = cfg.input_dim;
  const int D = cfg.embedding_dim;
  const int N = cfg.n_speakers;
  const int T = static_cast<int>(features.rows());
  if (grad_v.rows() != static_cast<Eigen::Index>(T) * F ||
      grad_v.cols() != D) {
    throw std::invalid_argument("grad_v shape mismatch");
  }

  ParamGrads g;
  g.config = cfg;

  // Through the row-normalization: dz = (g - (g.v) v) / ||z||.
  Eigen::MatrixXd d_dc(T, static_cast<Eigen::Index>(F) * D);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      const Eigen::Index i = static_cast<Eigen::Index>(t) * F + f;
      const auto v = fwd.embeddings.data.row(i);
      const auto gv = grad_v.row(i);
      d_dc.row(t).segment(f * D, D) =
          (gv - gv.dot(v) * v) / fwd.row_norms(i);
    }
  }

  const Eigen::MatrixXd& last_h = fwd.hidden_acts.back();
  g.dc_head.weight = last_h.transpose() * d_dc;
  g.dc_head.bias = d_dc.colwise().sum().transpose();
  Eigen::MatrixXd dh = d_dc * params.dc_head.weight.transpose();

  if (grad_masks != nullptr) {
    if (!cfg.with_mi_head) {
      throw std::invalid_argument("mask gradients without an MI head");
    }
    // Through the per-bin softmax: da = m .* (g - (g.m)).
    Eigen::MatrixXd d_mi(T, static_cast<Eigen::Index>(F) * N);
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < F; ++f) {
        Eigen::VectorXd m(N), gm(N);
        for (int n = 0; n < N; ++n) {
          m(n) = fwd.masks[n](t, f);
          gm(n) = (*grad_masks)[n](t, f);
        }
        const double gdot = gm.dot(m);
        d_mi.row(t).segment(f * N, N) =
            (m.array() * (gm.array() - gdot)).matrix().transpose();
      }
    }
    g.mi_head.weight = last_h.transpose() * d_mi;
    g.mi_head.bias = d_mi.colwise().sum().transpose();
    dh += d_mi * params.mi_head.weight.transpose();
  } else if (cfg.with_mi_head) {
    g.mi_head.weight = Eigen::MatrixXd::Zero(params.mi_head.weight.rows(),
                                             params.mi_head.weight.cols());
    g.mi_head.bias = Eigen::VectorXd::Zero(params.mi_head.bias.size());
  }

  g.hidden.resize(params.hidden.size());
  for (int l = static_cast<int>(params.hidden.size()) - 1; l >= 0; --l) {
    const Eigen::MatrixXd dpre =
        dh.array() * activation_grad(fwd.hidden_acts[l + 1], cfg.activation);
    g.hidden[l].weight = fwd.hidden_acts[l].transpose() * dpre;
    g.hidden[l].bias = dpre.colwise().sum().transpose();
    if (l > 0) dh = dpre * params.hidden[l].weight.transpose();
  }
  return g;
}

// ---- Checkpoint I/O ----

namespace {

constexpr char kMagic[4] = {'S', 'P', 'X', 'E'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_layer(std::ostream& out, const Layer& l) {
  write_pod<uint32_t>(out, static_cast<uint32_t>(l.weight.rows()));
  write_pod<uint32_t>(out, static_cast<uint32_t>(l.weight.cols()));
  for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
      write_pod<double>(out, l.weight(i, j));
    }
  }
  for (Eigen::Index j = 0; j < l.bias.size(); ++j) {
    write_pod<double>(out, l.bias(j));
  }
}

Layer read_layer(std::istream& in) {
  const uint32_t rows = read_pod<uint32_t>(in);
  const uint32_t cols = read_pod<uint32_t>(in);
  Layer l;
  l.weight.resize(rows, cols);
  for (uint32_t i = 0; i < rows; ++i) {
    for (uint32_t j = 0; j < cols; ++j) l.weight(i, j) = read_pod<double>(in);
  }
  l.bias.resize(cols);
  for (uint32_t j = 0; j < cols; ++j) l.bias(j) = read_pod<double>(in);
  return l;
}

}  // namespace

void save_params(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_pod<uint32_t>(out, kVersion);
  const NetworkConfig& c = params.config;
  write_pod<uint32_t>(out, static_cast<uint32_t>(c.input_dim));
  write_pod<uint32_t>(out, static_cast<uint32_t>(c.context));
  write_pod<uint32_t>(out, static_cast<uint32_t>(c.embedding_dim));
  write_pod<uint32_t>(out, static_cast<uint32_t>(c.n_speakers));
  write_pod<uint32_t>(out, c.with_mi_head ? 1u : 0u);
  write_pod<uint32_t>(out, c.activation == Activation::Relu ? 1u : 0u);
  write_pod<uint64_t>(out, c.seed);
  write_pod<uint32_t>(out, static_cast<uint32_t>(c.hidden.size()));
  for (int w : c.hidden) write_pod<uint32_t>(out, static_cast<uint32_t>(w));
  for (const Layer& l : params.hidden) write_layer(out, l);
  write_layer(out, params.dc_head);
  if (c.with_mi_head) write_layer(out, params.mi_head);
  if (!out) throw std::runtime_error("short checkpoint write: " + path);
}

NetworkParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  if (read_pod<uint32_t>(in) != kVersion) {
    throw std::runtime_error("unsupported checkpoint version: " + path);
  }
  NetworkConfig c;
  c.input_dim = static_cast<int>(read_pod<uint32_t>(in));
  c.context = static_cast<int>(read_pod<uint32_t>(in));
  c.embedding_dim = static_cast<int>(read_pod<uint32_t>(in));
  c.n_speakers = static_cast<int>(read_pod<uint32_t>(in));
  c.with_mi_head = read_pod<uint32_t>(in) != 0;
  c.activation =
      read_pod<uint32_t>(in) != 0 ? Activation::Relu : Activation::Tanh;
  c.seed = read_pod<uint64_t>(in);
  const uint32_t n_hidden = read_pod<uint32_t>(in);
  c.hidden.clear();
  for (uint32_t i = 0; i < n_hidden; ++i) {
    c.hidden.push_back(static_cast<int>(read_pod<uint32_t>(in)));
  }
  NetworkParams p;
  p.config = c;
  for (uint32_t i = 0; i < n_hidden; ++i) p.hidden.push_back(read_layer(in));
  p.dc_head = read_layer(in);
  if (c.with_mi_head) p.mi_head = read_layer(in);
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return p;
}

}  // namespace mdc
