#include "mdc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mdc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double energy(const std::vector<double>& a) { return dot(a, a); }

double ratio_db(double num, double den) {
  // Error energies below 180 dB under the target are rounding noise from
  // the projections; report them as the exact-match sentinel.
  if (den <= 0.0 || den < num * 1e-18) return kInf;
  return 10.0 * std::log10(num / den);
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double si_sdr(const std::vector<double>& estimate,
              const std::vector<double>& reference) {
  if (estimate.size() != reference.size()) {
    throw std::invalid_argument("si_sdr: length mismatch");
  }
  const double ref_energy = energy(reference);
  if (ref_energy <= 0.0) {
    throw std::invalid_argument("si_sdr: reference is all-zero");
  }
  const double a = dot(estimate, reference) / ref_energy;
  const double target_energy = a * a * ref_energy;
  double err = 0.0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    const double d = estimate[i] - a * reference[i];
    err += d * d;
  }
  return ratio_db(target_energy, err);
}

SourceMetrics bss_metrics(const std::vector<double>& estimate,
                          const std::vector<std::vector<double>>& references,
                          int target_index) {
  const size_t len = estimate.size();
  const int n_ref = static_cast<int>(references.size());
  if (target_index < 0 || target_index >= n_ref) {
    throw std::invalid_argument("bss_metrics: target index out of range");
  }
  for (const auto& r : references) {
    if (r.size() != len) {
      throw std::invalid_argument("bss_metrics: length mismatch");
    }
  }

  Eigen::MatrixXd R(len, n_ref);
  for (int j = 0; j < n_ref; ++j) R.col(j) = to_vec(references[j]);
  const Eigen::VectorXd e = to_vec(estimate);

  // s_target: projection onto the true reference.
  const Eigen::VectorXd& s = R.col(target_index);
  const double s_en = s.squaredNorm();
  if (s_en <= 0.0) {
    throw std::invalid_argument("bss_metrics: reference is all-zero");
  }
  const Eigen::VectorXd s_target = (e.dot(s) / s_en) * s;

  // Projection onto span(all references) via least squares.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(R);
  if (qr.rank() < n_ref) {
    throw std::invalid_argument("bss_metrics: references are rank-deficient");
  }
  const Eigen::VectorXd coeffs = qr.solve(e);
  const Eigen::VectorXd p_all = R * coeffs;

  const Eigen::VectorXd e_interf = p_all - s_target;
  const Eigen::VectorXd e_artif = e - p_all;

  SourceMetrics m;
  m.sdr = ratio_db(s_target.squaredNorm(), (e_interf + e_artif).squaredNorm());
  m.sir = ratio_db(s_target.squaredNorm(), e_interf.squaredNorm());
  m.sar = ratio_db((s_target + e_interf).squaredNorm(), e_artif.squaredNorm());
  return m;
}

SeparationReport align_and_report(
    const std::vector<std::vector<double>>& estimates,
    const std::vector<std::vector<double>>& references,
    const std::vector<double>& mixture) {
  const int n = static_cast<int>(references.size());
  if (static_cast<int>(estimates.size()) != n) {
    throw std::invalid_argument("align_and_report: count mismatch");
  }
  if (n > 8) {
    throw std::invalid_argument(
        "align_and_report: exhaustive search limited to N <= 8");
  }

  // Pairwise SI-SDR table, est i vs ref j.
  Eigen::MatrixXd table(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      table(i, j) = si_sdr(estimates[i], references[j]);
    }
  }

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm = perm;
  double best = -kInf;
  do {
    double total = 0.0;
    for (int j = 0; j < n; ++j) total += table(perm[j], j);
    if (total > best) {
      best = total;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  SeparationReport rep;
  rep.permutation = best_perm;
  for (int j = 0; j < n; ++j) {
    const auto& est = estimates[best_perm[j]];
    SourceMetrics m = bss_metrics(est, references, j);
    m.si_sdr = table(best_perm[j], j);
    SourceMetrics base = bss_metrics(mixture, references, j);
    base.si_sdr = si_sdr(mixture, references[j]);
    // Equal values (including matching infinities) improve by zero.
    auto diff = [](double a, double b) { return a == b ? 0.0 : a - b; };
    SourceMetrics imp;
    imp.si_sdr = diff(m.si_sdr, base.si_sdr);
    imp.sdr = diff(m.sdr, base.sdr);
    imp.sir = diff(m.sir, base.sir);
    imp.sar = diff(m.sar, base.sar);
    rep.per_source.push_back(m);
    rep.improvements.push_back(imp);
  }
  return rep;
}

}  // namespace mdc
