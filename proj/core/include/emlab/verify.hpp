#pragma once

/**
 * Oracle-backed verification suite.
 *
 * Each check exercises one theoretical property of the estimators and
 * objectives against exhaustive enumeration and finite differences:
 * estimator unbiasedness, gradient correctness of the combined objectives,
 * the vanishing pathwise term of the sequence-level estimator, the
 * partiality of the single-term heuristics, baseline unbiasedness, the
 * fixed-length factorized constancy of the token-level estimate, and the
 * beam/greedy decoding contracts.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "emlab/objectives.hpp"
#include "emlab/policy.hpp"

namespace emlab::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<std::string> available_checks();

// Runs all checks (or the named subset) with policies seeded from `seed`.
// Unknown names in `only` throw ContractViolation.
std::vector<CheckResult> run_checks(std::uint64_t seed,
                                    const std::vector<std::string>& only = {});

// Reference policy for the partiality comparison; fixed independent of the
// verification seed so its error magnitudes can be pinned.
Policy reference_policy_p1();

// Max-abs component error between the exact expectation of the single-sample
// gradient of `kind` (g = 1, no baseline, no normalization) and the
// finite-difference gradient of the exact entropy.
double expected_gradient_error(const Policy& policy, ObjectiveKind kind);

}  // namespace emlab::verify
