#pragma once

/**
 * Gradient assembly for the entropy-minimization objective family.
 *
 * The full token-level objective combines a score-function (policy gradient)
 * term weighted by the token-level entropy estimate and a pathwise term that
 * differentiates the per-step entropies directly:
 *
 *   EmTok:    N^-1 sum_i [ A_tok(y_i) * dlog pi(y_i) + dH_tok(y_i) ]
 *   EmSeq:    N^-1 sum_i   A_seq(y_i) * dlog pi(y_i)
 *   PgTok:    EmTok without the pathwise term
 *   EntTok:   only the pathwise term
 *   GreedyEm: the pathwise term on a single greedy-decoded sequence
 *
 * Advantage weights are stop-gradients: they enter assembly as constants.
 * With the leave-one-out baseline, A_i = h_i - mean of the other h_j.
 * N is the candidate count, or the total token count across candidates
 * (EOS included) under the DAPO-style token normalization.
 */

#include <string>
#include <string_view>
#include <vector>

#include "emlab/decoding.hpp"
#include "emlab/policy.hpp"

namespace emlab {

enum class ObjectiveKind { EmTok, EmSeq, PgTok, EntTok, GreedyEm };
enum class Baseline { Loo, None };
enum class Normalization { DapoToken, None };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::EmTok;
  Baseline baseline = Baseline::Loo;
  Normalization normalization = Normalization::DapoToken;
  CandidateSource source = CandidateSource::Sampled;
  int g = 16;
  // Escape hatch: normalize the pathwise term by the candidate count even
  // when the policy-gradient term uses token normalization. Off by default;
  // the default divides both terms by the same N.
  bool ent_norm_per_candidate = false;

  // Throws ContractViolation on an inconsistent combination.
  void validate() const;

  friend bool operator==(const ObjectiveSpec&, const ObjectiveSpec&) = default;
};

struct AdvantageSet {
  std::vector<double> values;
};

// Loo: A_i = h_i - mean_{j != i}(h_j)  (needs g >= 2); None: A_i = h_i.
AdvantageSet advantages(const std::vector<double>& h_values, Baseline baseline);

// Gradient of the configured loss over the candidate set.
GradVector objective_gradient(const Policy& policy, const CandidateSet& cands,
                              const ObjectiveSpec& spec);

// Method-name mapping used by the config file and CLI: "em-tok", "em-seq",
// "pg-tok", "ent-tok" (each accepting a "-b" suffix for beam candidates)
// and "greedy-em". Non-greedy methods default to the leave-one-out baseline
// with token normalization.
ObjectiveSpec make_method(std::string_view name, int g);
std::string method_name(const ObjectiveSpec& spec);
std::vector<std::string> known_method_names();

}  // namespace emlab
