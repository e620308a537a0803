#pragma once

/**
 * Candidate-sequence generation: greedy decoding, i.i.d. sampling batches,
 * and length-synchronous beam search over raw log-probabilities (no length
 * normalization). Finished hypotheses compete with live ones for beam slots
 * by total log-prob; ties break toward the lexicographically smaller token
 * sequence, so beam width 1 reproduces greedy decoding exactly.
 */

#include <vector>

#include "emlab/policy.hpp"

namespace emlab {

enum class CandidateSource { Sampled, Beam, Greedy };

struct CandidateSet {
  std::vector<Sequence> seqs;
  std::vector<double> logps;  // consistent with sequence_log_prob
  CandidateSource source = CandidateSource::Sampled;
  bool underfilled = false;  // beam asked for more completions than the support holds

  int size() const { return static_cast<int>(seqs.size()); }
};

// Argmax token at each step; ties pick the lowest token id.
Sequence greedy_decode(const Policy& policy);

// g independent ancestral samples (duplicates allowed), log-probs filled.
CandidateSet sample_batch(const Policy& policy, int g, Rng& rng);

// Top-g completed sequences by total log-prob, sorted descending. If g
// exceeds the number of positive-probability completions, returns them all
// with the underfilled flag set.
CandidateSet beam_search(const Policy& policy, int g);

}  // namespace emlab
