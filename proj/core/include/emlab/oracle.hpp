#pragma once

/**
 * Ground truth by exhaustive enumeration.
 *
 * Everything here is deterministic and seed-free. Sequence log-probs are
 * accumulated left-to-right exactly as the sampling and beam paths do, so
 * values agree bitwise across modules. Central finite differences are the
 * root source of gradient truth; the analytic entropy gradient is validated
 * against them and then used where speed matters.
 */

#include <cstddef>
#include <functional>
#include <vector>

#include "emlab/objectives.hpp"
#include "emlab/policy.hpp"

namespace emlab::oracle {

inline constexpr std::size_t kDefaultCap = 1'000'000;

struct SupportEntry {
  Sequence seq;
  double log_prob = 0.0;
  double prob = 0.0;
};

// Every positive-probability sequence, in token-lexicographic order.
// Throws CapacityError when the worst-case support size exceeds cap.
std::vector<SupportEntry> enumerate_support(const Policy& policy,
                                            std::size_t cap = kDefaultCap);

// Worst-case support size (sum of content_size^l for l = 0..l_max), saturated.
std::size_t support_bound(const Policy& policy);

// H(pi) = sum_y p(y) (-log p(y)), with 0 log 0 = 0.
double exact_entropy(const Policy& policy, std::size_t cap = kDefaultCap);

// Analytic dH/dtheta = sum_y p(y) (-log p(y) - 1) dlog p(y); validated
// against finite_difference_gradient, which stays authoritative.
GradVector exact_entropy_gradient(const Policy& policy, std::size_t cap = kDefaultCap);

// Central differences of an arbitrary scalar function of the policy.
GradVector finite_difference_gradient(const std::function<double(const Policy&)>& f,
                                      const Policy& policy, double eps = 1e-5);

// Exact expectation over the support of the single-sample estimator gradient:
// sum_y p(y) objective_gradient(policy, {y}, spec). The spec must have g = 1,
// no baseline, and no normalization.
GradVector expected_objective_gradient(const Policy& policy, const ObjectiveSpec& spec,
                                       std::size_t cap = kDefaultCap);

// Exact expectation over all ordered g-tuples of support sequences, weighted
// by the product probability. Used to check baselined group objectives.
GradVector expected_objective_gradient_tuples(const Policy& policy,
                                              const ObjectiveSpec& spec,
                                              std::size_t cap = kDefaultCap);

struct ConstancyResult {
  double variance = 0.0;
  double value = 0.0;
};

// Token-level entropy estimate evaluated on every outcome of a fixed-length
// factorized distribution (independent frames, no EOS dynamics). Returns the
// exact variance across outcomes and the common value sum_t H(frame_t).
ConstancyResult factorized_htok_constancy(const std::vector<std::vector<double>>& frame_dists,
                                          std::size_t cap = kDefaultCap);

}  // namespace emlab::oracle
