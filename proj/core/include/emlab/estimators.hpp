#pragma once

/**
 * Single-sample entropy estimators and their Monte Carlo aggregation.
 *
 * h_seq(y) is the negative total log-probability of one sampled sequence;
 * h_tok(y) sums the per-step conditional entropies along the sequence. Both
 * are unbiased for the sequence entropy when y is sampled from the policy.
 *
 * Convention: the sum in h_tok runs over every emitting step including the
 * one that emits EOS, so |y| counts the EOS token. When EOS lands on the
 * forced final position its step entropy is zero.
 */

#include "emlab/policy.hpp"

namespace emlab {

enum class EstimatorKind { Seq, Tok };

double h_seq(const Policy& policy, const Sequence& seq);
double h_tok(const Policy& policy, const Sequence& seq);

double estimator_value(const Policy& policy, const Sequence& seq, EstimatorKind kind);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Sample mean and standard error over n >= 2 independent samples.
McEstimate mc_entropy_estimate(const Policy& policy, EstimatorKind kind, int n, Rng& rng);

}  // namespace emlab
