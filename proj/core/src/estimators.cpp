#include "emlab/estimators.hpp"

#include <cmath>

namespace emlab {

double h_seq(const Policy& policy, const Sequence& seq) {
  return -sequence_log_prob(policy, seq);
}

double h_tok(const Policy& policy, const Sequence& seq) {
  validate_sequence(policy, seq);
  double h = 0.0;
  int prev = kStart;
  for (int t = 1; t <= seq.length(); ++t) {
    h += token_entropy(policy, t, prev);
    prev = seq.tokens[t - 1];
  }
  return h;
}

double estimator_value(const Policy& policy, const Sequence& seq, EstimatorKind kind) {
  return kind == EstimatorKind::Seq ? h_seq(policy, seq) : h_tok(policy, seq);
}

McEstimate mc_entropy_estimate(const Policy& policy, EstimatorKind kind, int n, Rng& rng) {
  if (n < 2) throw ContractViolation("mc_entropy_estimate needs at least 2 samples");
  // Welford keeps the mean exact when every sample is identical.
  double mean = 0.0;
  double m2 = 0.0;
  for (int i = 1; i <= n; ++i) {
    const Sequence y = sample_sequence(policy, rng);
    const double x = estimator_value(policy, y, kind);
    const double d = x - mean;
    mean += d / i;
    m2 += d * (x - mean);
  }
  const double var = m2 / (n - 1);
  return McEstimate{mean, std::sqrt(var / n)};
}

}  // namespace emlab
