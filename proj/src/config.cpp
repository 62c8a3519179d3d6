#include "mdc/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mdc {

Method method_from_string(const std::string& s) {
  if (s == "dc") return Method::Dc;
  if (s == "mdc") return Method::Mdc;
  if (s == "chimera-dc") return Method::ChimeraDc;
  if (s == "chimera-mdc") return Method::ChimeraMdc;
  throw std::invalid_argument("unknown method: " + s);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Dc: return "dc";
    case Method::Mdc: return "mdc";
    case Method::ChimeraDc: return "chimera-dc";
    case Method::ChimeraMdc: return "chimera-mdc";
  }
  return "?";
}

TargetMode method_target_mode(Method m) {
  return (m == Method::Dc || m == Method::ChimeraDc) ? TargetMode::OneHot
                                                     : TargetMode::Simplex;
}

bool method_has_mi_head(Method m) {
  return m == Method::ChimeraDc || m == Method::ChimeraMdc;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
  if (n_train < 1 || n_val < 1 || n_eval < 1) {
    throw std::invalid_argument("scene counts must be >= 1");
  }
  for (double a : alphas) {
    if (a < 0.0 || a > 1.0) {
      throw std::invalid_argument("alpha values must lie in [0, 1]");
    }
  }
  train.validate();
  NetworkConfig n = net;
  n.input_dim = stft.n_freqs();
  n.n_speakers = n_speakers;
  n.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("bad boolean value: " + v);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "method") {
        cfg.method = method_from_string(val);
      } else if (key == "alphas") {
        cfg.alphas.clear();
        for (const auto& a : split_csv(val)) cfg.alphas.push_back(std::stod(a));
      } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : split_csv(val)) cfg.seeds.push_back(std::stoull(s));
      } else if (key == "scene.kind") {
        cfg.scene_kind = scene_kind_from_string(val);
      } else if (key == "scene.n_speakers") {
        cfg.n_speakers = std::stoi(val);
      } else if (key == "scene.duration_s") {
        cfg.duration_s = std::stod(val);
      } else if (key == "n_train") {
        cfg.n_train = std::stoi(val);
      } else if (key == "n_val") {
        cfg.n_val = std::stoi(val);
      } else if (key == "n_eval") {
        cfg.n_eval = std::stoi(val);
      } else if (key == "drop_silence") {
        cfg.drop_silence = parse_bool(val);
      } else if (key == "out_dir") {
        cfg.out_dir = val;
      } else if (key == "net.context") {
        cfg.net.context = std::stoi(val);
      } else if (key == "net.hidden") {
        cfg.net.hidden.clear();
        for (const auto& w : split_csv(val)) cfg.net.hidden.push_back(std::stoi(w));
      } else if (key == "net.embedding_dim") {
        cfg.net.embedding_dim = std::stoi(val);
      } else if (key == "net.activation") {
        if (val == "tanh") cfg.net.activation = Activation::Tanh;
        else if (val == "relu") cfg.net.activation = Activation::Relu;
        else throw std::invalid_argument("bad activation: " + val);
      } else if (key == "train.learning_rate") {
        cfg.train.learning_rate = std::stod(val);
      } else if (key == "train.decay_factor") {
        cfg.train.decay_factor = std::stod(val);
      } else if (key == "train.plateau_patience") {
        cfg.train.plateau_patience = std::stoi(val);
      } else if (key == "train.stop_patience") {
        cfg.train.stop_patience = std::stoi(val);
      } else if (key == "train.batch_size") {
        cfg.train.batch_size = std::stoi(val);
      } else if (key == "train.max_epochs") {
        cfg.train.max_epochs = std::stoi(val);
      } else if (key == "train.rms_decay") {
        cfg.train.rms_decay = std::stod(val);
      } else if (key == "train.rms_epsilon") {
        cfg.train.rms_epsilon = std::stod(val);
      } else if (key == "stft.win_len") {
        cfg.stft.win_len = std::stoi(val);
      } else if (key == "stft.hop") {
        cfg.stft.hop = std::stoi(val);
      } else if (key == "stft.sample_rate") {
        cfg.stft.sample_rate = std::stoi(val);
      } else if (key == "kmeans.max_iters") {
        cfg.kmeans.max_iters = std::stoi(val);
      } else if (key == "kmeans.tol") {
        cfg.kmeans.tol = std::stod(val);
      } else if (key == "kmeans.n_restarts") {
        cfg.kmeans.n_restarts = std::stoi(val);
      } else {
        throw std::invalid_argument("unknown config key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " (" + key + "): " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "method = " << to_string(cfg.method) << '\n';
  out << "alphas = ";
  for (size_t i = 0; i < cfg.alphas.size(); ++i) {
    out << (i ? "," : "") << cfg.alphas[i];
  }
  out << '\n' << "seeds = ";
  for (size_t i = 0; i < cfg.seeds.size(); ++i) {
    out << (i ? "," : "") << cfg.seeds[i];
  }
  out << '\n';
  out << "scene.kind = " << to_string(cfg.scene_kind) << '\n';
  out << "scene.n_speakers = " << cfg.n_speakers << '\n';
  out << "scene.duration_s = " << cfg.duration_s << '\n';
  out << "n_train = " << cfg.n_train << '\n';
  out << "n_val = " << cfg.n_val << '\n';
  out << "n_eval = " << cfg.n_eval << '\n';
  out << "drop_silence = " << (cfg.drop_silence ? "true" : "false") << '\n';
  out << "out_dir = " << cfg.out_dir << '\n';
  out << "net.context = " << cfg.net.context << '\n';
  out << "net.hidden = ";
  for (size_t i = 0; i < cfg.net.hidden.size(); ++i) {
    out << (i ? "," : "") << cfg.net.hidden[i];
  }
  out << '\n';
  out << "net.embedding_dim = " << cfg.net.embedding_dim << '\n';
  out << "net.activation = "
      << (cfg.net.activation == Activation::Relu ? "relu" : "tanh") << '\n';
  out << "train.learning_rate = " << cfg.train.learning_rate << '\n';
  out << "train.decay_factor = " << cfg.train.decay_factor << '\n';
  out << "train.plateau_patience = " << cfg.train.plateau_patience << '\n';
  out << "train.stop_patience = " << cfg.train.stop_patience << '\n';
  out << "train.batch_size = " << cfg.train.batch_size << '\n';
  out << "train.max_epochs = " << cfg.train.max_epochs << '\n';
  out << "train.rms_decay = " << cfg.train.rms_decay << '\n';
  out << "train.rms_epsilon = " << cfg.train.rms_epsilon << '\n';
  out << "stft.win_len = " << cfg.stft.win_len << '\n';
  out << "stft.hop = " << cfg.stft.hop << '\n';
  out << "stft.sample_rate = " << cfg.stft.sample_rate << '\n';
  out << "kmeans.max_iters = " << cfg.kmeans.max_iters << '\n';
  out << "kmeans.tol = " << cfg.kmeans.tol << '\n';
  out << "kmeans.n_restarts = " << cfg.kmeans.n_restarts << '\n';
  return out.str();
}

}  // namespace mdc
