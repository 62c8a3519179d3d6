#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mdc {

// Per-source permutation-aligned separation metrics, in dB. Exact matches
// produce an infinity sentinel (serialized as "inf").
struct SourceMetrics {
  double si_sdr = 0.0;
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

struct SeparationReport {
  std::vector<SourceMetrics> per_source;      // aligned to reference order
  std::vector<SourceMetrics> improvements;    // metric - metric(mixture)
  std::vector<int> permutation;               // estimate index per reference
};

// Scale-invariant SDR: 10 log10(||a s||^2 / ||a s - e||^2) with
// a = <e, s>/||s||^2. Returns +inf when the error term vanishes.
double si_sdr(const std::vector<double>& estimate,
              const std::vector<double>& reference);

// Instantaneous projection-based SDR/SIR/SAR: the estimate is decomposed
// against span(reference) and span(all references); no allowed-distortion
// filtering.
SourceMetrics bss_metrics(const std::vector<double>& estimate,
                          const std::vector<std::vector<double>>& references,
                          int target_index);

// Chooses the estimate-to-reference permutation maximizing mean SI-SDR
// (exhaustive, N <= 8) and reports all metrics under it plus improvements
// over the mixture baseline.
SeparationReport align_and_report(
    const std::vector<std::vector<double>>& estimates,
    const std::vector<std::vector<double>>& references,
    const std::vector<double>& mixture);

}  // namespace mdc
