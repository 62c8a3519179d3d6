#include "mdc/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace mdc {

namespace {

std::string scene_id(int idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", idx);
  return buf;
}

unsigned long long scene_seed(const ExperimentConfig& cfg, int idx) {
  return cfg.seeds.front() * 1000003ULL + static_cast<unsigned long long>(idx);
}

std::string alpha_tag(double alpha) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "a%.2f", alpha);
  return buf;
}

std::string fmt_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

double parse_metric(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

std::string perm_string(const std::vector<int>& perm) {
  std::string s;
  for (size_t i = 0; i < perm.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(perm[i]);
  }
  return s;
}

}  // namespace

std::string checkpoint_path(const ExperimentConfig& cfg, Method method,
                            double alpha, unsigned long long seed) {
  return cfg.out_dir + "/checkpoints/" + to_string(method) + "_" +
         alpha_tag(alpha) + "_s" + std::to_string(seed) + ".spxe";
}

std::string report_path(const ExperimentConfig& cfg, Method method,
                        double alpha, unsigned long long seed) {
  return cfg.out_dir + "/reports/" + to_string(method) + "_" +
         alpha_tag(alpha) + "_s" + std::to_string(seed) + ".csv";
}

void cmd_gen_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path scenes_dir = fs::path(cfg.out_dir) / "scenes";
  fs::create_directories(scenes_dir);

  std::ofstream manifest(fs::path(cfg.out_dir) / "manifest.txt");
  if (!manifest) {
    throw std::runtime_error("cannot write manifest under " + cfg.out_dir);
  }
  const int total = cfg.n_train + cfg.n_val + cfg.n_eval;
  for (int i = 0; i < total; ++i) {
    const std::string id = scene_id(i);
    const std::string split = i < cfg.n_train             ? "train"
                              : i < cfg.n_train + cfg.n_val ? "val"
                                                            : "eval";
    const unsigned long long seed = scene_seed(cfg, i);
    MixtureScene scene =
        synth_scene(cfg.scene_kind, cfg.n_speakers, cfg.duration_s,
                    cfg.stft.sample_rate, seed, cfg.stft);
    const fs::path dir = scenes_dir / id;
    fs::create_directories(dir);
    wav_write((dir / "mixture.wav").string(), scene.mixture,
              cfg.stft.sample_rate);
    for (int s = 0; s < cfg.n_speakers; ++s) {
      wav_write((dir / ("src" + std::to_string(s) + ".wav")).string(),
                scene.sources[s], cfg.stft.sample_rate);
    }
    std::ofstream meta(dir / "meta.txt");
    meta << "kind=" << to_string(cfg.scene_kind) << '\n'
         << "seed=" << seed << '\n'
         << "sample_rate=" << cfg.stft.sample_rate << '\n'
         << "n_speakers=" << cfg.n_speakers << '\n';
    manifest << id << ' ' << split << '\n';
  }
  // Copy of the config alongside the data for reproducibility.
  std::ofstream cfg_copy(fs::path(cfg.out_dir) / "config.txt");
  cfg_copy << config_to_text(cfg);
}

std::vector<MixtureScene> load_scenes(const ExperimentConfig& cfg,
                                      const std::string& split) {
  std::ifstream manifest(fs::path(cfg.out_dir) / "manifest.txt");
  if (!manifest) {
    throw std::runtime_error("missing manifest; run gen-data first");
  }
  std::vector<MixtureScene> scenes;
  std::string id, sp;
  while (manifest >> id >> sp) {
    if (sp != split) continue;
    const fs::path dir = fs::path(cfg.out_dir) / "scenes" / id;
    MixtureScene scene;
    int rate = 0;
    scene.mixture = wav_read((dir / "mixture.wav").string(), &rate);
    scene.sample_rate = rate;
    for (int s = 0;; ++s) {
      const fs::path src = dir / ("src" + std::to_string(s) + ".wav");
      if (!fs::exists(src)) break;
      scene.sources.push_back(wav_read(src.string(), nullptr));
    }
    if (scene.sources.empty()) {
      throw std::runtime_error("scene has no sources: " + dir.string());
    }
    scene.kind = cfg.scene_kind;
    analyze_scene(scene, cfg.stft);
    scenes.push_back(std::move(scene));
  }
  if (scenes.empty()) {
    throw std::runtime_error("no scenes in split: " + split);
  }
  return scenes;
}

std::vector<TrainExample> make_examples(const std::vector<MixtureScene>& scenes,
                                        const ExperimentConfig& cfg,
                                        TargetMode mode) {
  std::vector<TrainExample> out;
  out.reserve(scenes.size());
  for (const auto& scene : scenes) {
    TrainExample ex;
    ex.features = scene_features(scene, cfg.net.context);
    auto [targets, kept] = indicator_and_targets(scene, mode, cfg.drop_silence);
    ex.targets = std::move(targets);
    ex.kept_bins = std::move(kept);
    ex.mix_mag = scene.mix_mag;
    ex.src_mags = scene.src_mags;
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

NetworkConfig make_net_config(const ExperimentConfig& cfg, Method method,
                              unsigned long long seed) {
  NetworkConfig net = cfg.net;
  net.input_dim = cfg.stft.n_freqs();
  net.n_speakers = cfg.n_speakers;
  net.with_mi_head = method_has_mi_head(method);
  net.seed = seed;
  return net;
}

}  // namespace

std::string cmd_train(const ExperimentConfig& cfg, Method method, double alpha,
                      unsigned long long seed) {
  cfg.validate();
  const auto train_scenes = load_scenes(cfg, "train");
  const auto val_scenes = load_scenes(cfg, "val");
  const TargetMode mode = method_target_mode(method);
  const auto train_set = make_examples(train_scenes, cfg, mode);
  const auto val_set = make_examples(val_scenes, cfg, mode);

  const NetworkConfig net = make_net_config(cfg, method, seed);
  TrainConfig tc = cfg.train;
  tc.target_mode = mode;
  tc.alpha = method_has_mi_head(method) ? alpha : 1.0;
  tc.seed = seed;

  auto [params, log] = train(net, tc, train_set, val_set);

  fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
  fs::create_directories(fs::path(cfg.out_dir) / "logs");
  const std::string ckpt = checkpoint_path(cfg, method, tc.alpha, seed);
  save_params(params, ckpt);
  write_train_log_csv(log, cfg.out_dir + "/logs/" + to_string(method) + "_" +
                               alpha_tag(tc.alpha) + "_s" +
                               std::to_string(seed) + ".csv");
  return ckpt;
}

std::vector<ReportRow> cmd_evaluate(const ExperimentConfig& cfg, Method method,
                                    double alpha, unsigned long long seed,
                                    bool oracle) {
  cfg.validate();
  const auto scenes = load_scenes(cfg, "eval");
  NetworkParams params;
  if (!oracle) {
    params = load_params(checkpoint_path(cfg, method, alpha, seed));
    if (params.config.n_speakers != cfg.n_speakers ||
        params.config.input_dim != cfg.stft.n_freqs()) {
      throw std::runtime_error("checkpoint does not match config");
    }
  }
  const bool ratio_masks =
      !oracle && method_has_mi_head(method) && alpha < 1.0;
  const std::string mask_source =
      oracle ? "oracle" : (ratio_masks ? "ratio" : "binary");

  std::vector<ReportRow> rows;
  int idx = -1;
  std::ifstream manifest(fs::path(cfg.out_dir) / "manifest.txt");
  std::vector<std::string> eval_ids;
  {
    std::string id, sp;
    while (manifest >> id >> sp) {
      if (sp == "eval") eval_ids.push_back(id);
    }
  }

  for (const auto& scene : scenes) {
    ++idx;
    const int T = static_cast<int>(scene.mix_mag.rows());
    const int F = static_cast<int>(scene.mix_mag.cols());
    const int N = scene.n_speakers;

    std::vector<Eigen::MatrixXd> masks;
    if (oracle) {
      std::vector<int> all_bins(static_cast<size_t>(T) * F);
      std::iota(all_bins.begin(), all_bins.end(), 0);
      masks = labels_to_masks(scene.indicator, all_bins, T, F, N);
    } else {
      const ForwardResult fwd = forward(params, scene_features(scene, cfg.net.context));
      if (ratio_masks) {
        masks = fwd.masks;
      } else {
        auto [targets, kept] = indicator_and_targets(
            scene, method_target_mode(method), cfg.drop_silence);
        (void)targets;
        Eigen::MatrixXd points(kept.size(), fwd.embeddings.dim);
        for (size_t i = 0; i < kept.size(); ++i) {
          points.row(static_cast<Eigen::Index>(i)) =
              fwd.embeddings.data.row(kept[i]);
        }
        KMeansConfig kc = cfg.kmeans;
        kc.k = N;
        kc.seed = seed;
        const ClusterResult clusters = kmeans(points, kc);
        masks = labels_to_masks(clusters.labels, kept, T, F, N);
      }
    }

    const auto separated = apply_masks(scene.mix_spec, masks);
    std::vector<std::vector<double>> estimates;
    for (const auto& spec : separated) {
      estimates.push_back(istft(spec, cfg.stft));
    }
    const size_t len = estimates.front().size();
    std::vector<std::vector<double>> refs;
    for (const auto& src : scene.sources) {
      refs.emplace_back(src.begin(), src.begin() + len);
    }
    const std::vector<double> mix(scene.mixture.begin(),
                                  scene.mixture.begin() + len);
    const SeparationReport rep = align_and_report(estimates, refs, mix);

    for (int s = 0; s < N; ++s) {
      ReportRow row;
      row.scene_id = idx < static_cast<int>(eval_ids.size())
                         ? eval_ids[idx]
                         : scene_id(idx);
      row.method = method;
      row.alpha = alpha;
      row.seed = seed;
      row.source_idx = s;
      row.si_sdr = rep.per_source[s].si_sdr;
      row.si_sdr_i = rep.improvements[s].si_sdr;
      row.sdr = rep.per_source[s].sdr;
      row.sir = rep.per_source[s].sir;
      row.sar = rep.per_source[s].sar;
      row.permutation = perm_string(rep.permutation);
      row.mask_source = mask_source;
      rows.push_back(std::move(row));
    }
  }

  fs::create_directories(fs::path(cfg.out_dir) / "reports");
  write_report_csv(rows, report_path(cfg, method, alpha, seed));
  return rows;
}

void write_report_csv(const std::vector<ReportRow>& rows,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  if (!rows.empty()) out << "# mask_source=" << rows.front().mask_source << '\n';
  out << "scene_id,method,alpha,seed,source_idx,si_sdr,si_sdr_i,sdr,sir,sar,"
         "permutation\n";
  for (const auto& r : rows) {
    out << r.scene_id << ',' << to_string(r.method) << ','
        << fmt_metric(r.alpha) << ',' << r.seed << ',' << r.source_idx << ','
        << fmt_metric(r.si_sdr) << ',' << fmt_metric(r.si_sdr_i) << ','
        << fmt_metric(r.sdr) << ',' << fmt_metric(r.sir) << ','
        << fmt_metric(r.sar) << ',' << r.permutation << '\n';
  }
}

std::vector<ReportRow> read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  std::vector<ReportRow> rows;
  std::string line;
  std::string mask_source;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# mask_source=", 0) == 0) {
      mask_source = line.substr(14);
      continue;
    }
    if (line[0] == '#' || line.rfind("scene_id,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    ReportRow r;
    std::getline(ss, r.scene_id, ',');
    std::getline(ss, field, ',');
    r.method = method_from_string(field);
    std::getline(ss, field, ',');
    r.alpha = parse_metric(field);
    std::getline(ss, field, ',');
    r.seed = std::stoull(field);
    std::getline(ss, field, ',');
    r.source_idx = std::stoi(field);
    std::getline(ss, field, ',');
    r.si_sdr = parse_metric(field);
    std::getline(ss, field, ',');
    r.si_sdr_i = parse_metric(field);
    std::getline(ss, field, ',');
    r.sdr = parse_metric(field);
    std::getline(ss, field, ',');
    r.sir = parse_metric(field);
    std::getline(ss, field, ',');
    r.sar = parse_metric(field);
    std::getline(ss, r.permutation, ',');
    r.mask_source = mask_source;
    rows.push_back(std::move(r));
  }
  return rows;
}

GradCheckResult cmd_gradcheck(const ExperimentConfig& cfg) {
  GradCheckResult res;
  std::mt19937_64 rng(cfg.seeds.front());
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Objective gradient vs central finite differences.
  {
    const int tf = 40, d = 6, n = 3;
    Eigen::MatrixXd V(tf, d);
    for (int i = 0; i < tf; ++i) {
      for (int j = 0; j < d; ++j) V(i, j) = gauss(rng);
      V.row(i).normalize();
    }
    std::vector<int> labels(tf);
    for (auto& l : labels) l = static_cast<int>(unit(rng) * n);
    // Raw expanded form; the FD probe perturbs rows off the unit sphere,
    // which the checked entry point would reject.
    auto raw_loss = [](const Eigen::MatrixXd& V, const Eigen::MatrixXd& Y) {
      return (V.transpose() * V).squaredNorm() +
             (Y.transpose() * Y).squaredNorm() -
             2.0 * (V.transpose() * Y).squaredNorm();
    };
    for (TargetMode mode : {TargetMode::OneHot, TargetMode::Simplex}) {
      const TargetMatrix Y = make_targets(labels, n, mode);
      EmbeddingMatrix em{V, 1, tf, d};
      const LossValue lv = affinity_loss_gradient(em, Y);
      const double h = 1e-5;
      for (int c = 0; c < 50; ++c) {
        const int i = static_cast<int>(unit(rng) * tf);
        const int j = static_cast<int>(unit(rng) * d);
        // Perturb the raw coordinate; the loss treats rows as free
        // variables, so skip re-normalization.
        Eigen::MatrixXd plus = V, minus = V;
        plus(i, j) += h;
        minus(i, j) -= h;
        const double fd =
            (raw_loss(plus, Y.data) - raw_loss(minus, Y.data)) / (2 * h);
        const double an = (*lv.gradient)(i, j);
        const double rel = std::abs(an - fd) / std::max(std::abs(fd), 1e-6);
        res.objective_max_rel_err = std::max(res.objective_max_rel_err, rel);
      }
    }
  }

  // End-to-end parameter gradients through the network and chimera loss.
  {
    NetworkConfig net = make_net_config(cfg, Method::ChimeraMdc,
                                        cfg.seeds.front());
    net.input_dim = 9;  // tiny synthetic problem
    net.context = 1;
    net.hidden = {8};
    net.embedding_dim = 4;
    net.activation = Activation::Tanh;
    const int T = 5, F = 9, N = net.n_speakers;

    TrainExample ex;
    ex.features.resize(T, F);
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < F; ++f) ex.features(t, f) = gauss(rng);
    }
    std::vector<int> labels(static_cast<size_t>(T) * F);
    for (auto& l : labels) l = static_cast<int>(unit(rng) * N);
    ex.targets = make_targets(labels, N, TargetMode::Simplex);
    ex.kept_bins.resize(labels.size());
    std::iota(ex.kept_bins.begin(), ex.kept_bins.end(), 0);
    ex.mix_mag = Eigen::MatrixXd::NullaryExpr(
        T, F, [&]() { return 0.1 + unit(rng); });
    for (int s = 0; s < N; ++s) {
      ex.src_mags.push_back(Eigen::MatrixXd::NullaryExpr(
          T, F, [&]() { return 0.1 + unit(rng); }));
    }

    const double alpha = 0.5;
    NetworkParams params = init_params(net);
    const SceneLoss sl = scene_loss_and_grads(params, ex, alpha);

    // Gather (tensor, grad) pairs for coordinate sampling.
    std::vector<std::pair<Eigen::MatrixXd*, const Eigen::MatrixXd*>> weights;
    std::vector<std::pair<Eigen::VectorXd*, const Eigen::VectorXd*>> biases;
    for (size_t l = 0; l < params.hidden.size(); ++l) {
      weights.push_back({&params.hidden[l].weight, &sl.grads.hidden[l].weight});
      biases.push_back({&params.hidden[l].bias, &sl.grads.hidden[l].bias});
    }
    weights.push_back({&params.dc_head.weight, &sl.grads.dc_head.weight});
    biases.push_back({&params.dc_head.bias, &sl.grads.dc_head.bias});
    weights.push_back({&params.mi_head.weight, &sl.grads.mi_head.weight});
    biases.push_back({&params.mi_head.bias, &sl.grads.mi_head.bias});

    const double h = 1e-5;
    auto fd_check = [&](double* coord, double analytic) {
      const double saved = *coord;
      *coord = saved + h;
      const double lp = scene_loss(params, ex, alpha);
      *coord = saved - h;
      const double lm = scene_loss(params, ex, alpha);
      *coord = saved;
      const double fd = (lp - lm) / (2 * h);
      const double rel =
          std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6);
      res.network_max_rel_err = std::max(res.network_max_rel_err, rel);
    };
    for (int c = 0; c < 80; ++c) {
      auto& [w, g] = weights[static_cast<size_t>(unit(rng) * weights.size())];
      const int i = static_cast<int>(unit(rng) * w->rows());
      const int j = static_cast<int>(unit(rng) * w->cols());
      fd_check(&(*w)(i, j), (*g)(i, j));
    }
    for (int c = 0; c < 20; ++c) {
      auto& [b, g] = biases[static_cast<size_t>(unit(rng) * biases.size())];
      const int i = static_cast<int>(unit(rng) * b->size());
      fd_check(&(*b)(i), (*g)(i));
    }
  }

  res.passed =
      res.objective_max_rel_err < 1e-6 && res.network_max_rel_err < 1e-5;
  return res;
}

namespace {

struct MeanMetrics {
  double si_sdr = 0, si_sdr_i = 0, sdr = 0, sir = 0, sar = 0;
};

MeanMetrics mean_of(const std::vector<ReportRow>& rows) {
  MeanMetrics m;
  for (const auto& r : rows) {
    m.si_sdr += r.si_sdr;
    m.si_sdr_i += r.si_sdr_i;
    m.sdr += r.sdr;
    m.sir += r.sir;
    m.sar += r.sar;
  }
  const double n = static_cast<double>(rows.size());
  m.si_sdr /= n;
  m.si_sdr_i /= n;
  m.sdr /= n;
  m.sir /= n;
  m.sar /= n;
  return m;
}

}  // namespace

void cmd_compare(const ExperimentConfig& cfg, const std::string& out_csv) {
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write summary: " + out_csv);
  out << "method,seed,si_sdr,si_sdr_i,sdr,sir,sar\n";
  for (Method method : {Method::Dc, Method::Mdc}) {
    std::vector<MeanMetrics> per_seed;
    for (unsigned long long seed : cfg.seeds) {
      const std::string path = report_path(cfg, method, 1.0, seed);
      if (!fs::exists(path)) {
        std::cerr << "compare: missing report " << path << " (skipped)\n";
        continue;
      }
      const MeanMetrics m = mean_of(read_report_csv(path));
      per_seed.push_back(m);
      out << to_string(method) << ',' << seed << ',' << fmt_metric(m.si_sdr)
          << ',' << fmt_metric(m.si_sdr_i) << ',' << fmt_metric(m.sdr) << ','
          << fmt_metric(m.sir) << ',' << fmt_metric(m.sar) << '\n';
    }
    if (per_seed.empty()) continue;
    auto agg = [&](auto field, const char* tag) {
      double mean = 0;
      for (const auto& m : per_seed) mean += field(m);
      mean /= static_cast<double>(per_seed.size());
      double var = 0;
      for (const auto& m : per_seed) {
        var += (field(m) - mean) * (field(m) - mean);
      }
      var /= static_cast<double>(per_seed.size());
      return tag == std::string("mean") ? mean : std::sqrt(var);
    };
    for (const char* tag : {"mean", "std"}) {
      out << to_string(method) << ',' << tag << ','
          << fmt_metric(agg([](const MeanMetrics& m) { return m.si_sdr; }, tag))
          << ','
          << fmt_metric(
                 agg([](const MeanMetrics& m) { return m.si_sdr_i; }, tag))
          << ','
          << fmt_metric(agg([](const MeanMetrics& m) { return m.sdr; }, tag))
          << ','
          << fmt_metric(agg([](const MeanMetrics& m) { return m.sir; }, tag))
          << ','
          << fmt_metric(agg([](const MeanMetrics& m) { return m.sar; }, tag))
          << '\n';
    }
  }
}

void cmd_sweep_alpha(const ExperimentConfig& cfg, const std::string& out_csv) {
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write sweep summary: " + out_csv);
  out << "alpha,method,seed,si_sdr,si_sdr_i,sdr,sir,sar\n";
  for (double alpha : cfg.alphas) {
    for (Method method : {Method::ChimeraDc, Method::ChimeraMdc}) {
      for (unsigned long long seed : cfg.seeds) {
        const std::string path = report_path(cfg, method, alpha, seed);
        if (!fs::exists(path)) {
          std::cerr << "sweep-alpha: missing report " << path
                    << " (skipped)\n";
          continue;
        }
        const MeanMetrics m = mean_of(read_report_csv(path));
        out << fmt_metric(alpha) << ',' << to_string(method) << ',' << seed
            << ',' << fmt_metric(m.si_sdr) << ',' << fmt_metric(m.si_sdr_i)
            << ',' << fmt_metric(m.sdr) << ',' << fmt_metric(m.sir) << ','
            << fmt_metric(m.sar) << '\n';
      }
    }
  }
}

}  // namespace mdc
