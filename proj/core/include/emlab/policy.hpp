#pragma once

/**
 * Tabular softmax autoregressive policy.
 *
 * The conditional distribution over the next token depends on the pair
 * (position, previous token). Logits live in one flat array with a fixed
 * layout, so gradient vectors can be exchanged as plain flat vectors:
 *
 *   index(position, prev, token) =
 *       ((position - 1) * (total_tokens + 1) + prev_slot) * total_tokens + token
 *
 * where positions are 1-based, prev_slot is the previous token id, and the
 * extra slot prev_slot == total_tokens is the start-of-sequence context used
 * only at position 1 (kStart in the API). Rows indexed by EOS as the previous
 * token exist in the layout but are unreachable during generation.
 *
 * Generation runs for at most l_max free steps; at position l_max + 1 the
 * next-token distribution is the EOS one-hot regardless of the stored logits,
 * which keeps the support finite and the sequence entropy well defined.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "emlab/errors.hpp"
#include "emlab/rng.hpp"
#include "emlab/types.hpp"

namespace emlab {

// Previous-token value for the position-1 context.
inline constexpr int kStart = -1;

struct Policy {
  Vocab vocab;
  int l_max = 6;
  std::vector<double> logits;  // (l_max + 1) x (total_tokens + 1) x total_tokens

  int total_tokens() const { return vocab.total_tokens(); }
  int prev_slots() const { return vocab.total_tokens() + 1; }

  std::size_t param_count() const {
    return static_cast<std::size_t>(l_max + 1) * prev_slots() * total_tokens();
  }

  // position is 1-based; prev is a token id or kStart.
  std::size_t param_index(int position, int prev, int token) const;
  std::size_t row_offset(int position, int prev) const;

  double logit(int position, int prev, int token) const {
    return logits[param_index(position, prev, token)];
  }
  double& logit(int position, int prev, int token) {
    return logits[param_index(position, prev, token)];
  }
};

// All logits zero.
Policy uniform_policy(Vocab vocab, int l_max);

// Logits i.i.d. N(0, scale^2) from the given seed.
Policy random_policy(Vocab vocab, int l_max, std::uint64_t seed, double scale = 1.0);

// Throws ContractViolation unless seq ends with its single EOS, fits within
// l_max free steps, and uses valid token ids.
void validate_sequence(const Policy& policy, const Sequence& seq);

// Next-token distribution at (position, prev); numerically stabilized
// softmax, or the EOS one-hot at the forced position l_max + 1.
std::vector<double> next_token_dist(const Policy& policy, int position, int prev);

// log pi(seq) = sum_t log pi(y_t | y_<t), in nats; always <= 0.
double sequence_log_prob(const Policy& policy, const Sequence& seq);

// Ancestral sampling with inverse-CDF categorical draws.
Sequence sample_sequence(const Policy& policy, Rng& rng);

// Gradient of sequence_log_prob: per visited context, d/dlogit_j equals
// [j == y_t] - pi(j | ctx); the forced EOS step contributes nothing.
GradVector grad_log_prob(const Policy& policy, const Sequence& seq);

// Accumulating form: acc += weight * grad_log_prob(policy, seq).
void add_grad_log_prob(const Policy& policy, const Sequence& seq, double weight,
                       GradVector& acc);

struct TokenEntropy {
  double entropy = 0.0;
  GradVector grad;
};

// Entropy of the next-token distribution at one context, with the analytic
// softmax gradient: d/dlogit_j = -p_j (log p_j + H). Terms with p == 0
// contribute zero; the forced position returns entropy 0 and a zero gradient.
TokenEntropy token_entropy_and_grad(const Policy& policy, int position, int prev);

// Entropy only (no gradient allocation).
double token_entropy(const Policy& policy, int position, int prev);

// acc += weight * d/dtheta H(pi(.|position, prev)); returns the entropy.
double add_token_entropy_grad(const Policy& policy, int position, int prev,
                              double weight, GradVector& acc);

// JSON object {content_size, l_max, logits}; round-trips value-exact.
std::string policy_to_json(const Policy& policy);
Policy policy_from_json(const std::string& text);

}  // namespace emlab
