#include "emlab/policy.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace emlab {

namespace {

int prev_slot_of(const Policy& policy, int prev) {
  return prev == kStart ? policy.total_tokens() : prev;
}

void check_context(const Policy& policy, int position, int prev) {
  if (position < 1 || position > policy.l_max + 1)
    throw ContractViolation("context position " + std::to_string(position) +
                            " outside [1, " + std::to_string(policy.l_max + 1) + "]");
  if ((prev == kStart) != (position == 1))
    throw ContractViolation("start context is used exactly at position 1");
  if (prev != kStart && (prev < 0 || prev >= policy.total_tokens()))
    throw ContractViolation("previous token id " + std::to_string(prev) + " out of range");
}

}  // namespace

std::size_t Policy::row_offset(int position, int prev) const {
  const int slot = prev_slot_of(*this, prev);
  return (static_cast<std::size_t>(position - 1) * prev_slots() + slot) * total_tokens();
}

std::size_t Policy::param_index(int position, int prev, int token) const {
  return row_offset(position, prev) + token;
}

Policy uniform_policy(Vocab vocab, int l_max) {
  if (vocab.content_size < 1) throw ContractViolation("vocab needs at least one content token");
  if (l_max < 1) throw ContractViolation("l_max must be >= 1");
  Policy p{vocab, l_max, {}};
  p.logits.assign(p.param_count(), 0.0);
  return p;
}

Policy random_policy(Vocab vocab, int l_max, std::uint64_t seed, double scale) {
  Policy p = uniform_policy(vocab, l_max);
  Rng rng(derive_seed(seed, 0x9011C7));
  for (double& v : p.logits) v = scale * rng.next_normal();
  return p;
}

void validate_sequence(const Policy& policy, const Sequence& seq) {
  if (seq.tokens.empty()) throw ContractViolation("sequence is empty");
  const int eos = policy.vocab.eos_id();
  if (seq.tokens.back() != eos) throw ContractViolation("sequence does not end with EOS");
  int eos_count = 0;
  for (int t : seq.tokens) {
    if (t < 0 || t >= policy.total_tokens())
      throw ContractViolation("sequence token id " + std::to_string(t) + " out of range");
    if (t == eos) ++eos_count;
  }
  if (eos_count != 1) throw ContractViolation("sequence contains EOS more than once");
  if (seq.length() > policy.l_max + 1)
    throw ContractViolation("sequence longer than l_max + 1 tokens");
}

std::vector<double> next_token_dist(const Policy& policy, int position, int prev) {
  check_context(policy, position, prev);
  const int n = policy.total_tokens();
  std::vector<double> dist(n, 0.0);
  if (position == policy.l_max + 1) {
    dist[policy.vocab.eos_id()] = 1.0;
    return dist;
  }
  const std::size_t base = policy.row_offset(position, prev);
  double max_logit = policy.logits[base];
  for (int j = 1; j < n; ++j) max_logit = std::max(max_logit, policy.logits[base + j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    dist[j] = std::exp(policy.logits[base + j] - max_logit);
    sum += dist[j];
  }
  for (int j = 0; j < n; ++j) dist[j] /= sum;
  return dist;
}

double sequence_log_prob(const Policy& policy, const Sequence& seq) {
  validate_sequence(policy, seq);
  double logp = 0.0;
  int prev = kStart;
  for (int t = 1; t <= seq.length(); ++t) {
    const int tok = seq.tokens[t - 1];
    const std::vector<double> dist = next_token_dist(policy, t, prev);
    logp += std::log(dist[tok]);
    prev = tok;
  }
  return logp;
}

namespace {

int categorical_draw(const std::vector<double>& dist, Rng& rng) {
  const double u = rng.next_unit();
  double cum = 0.0;
  int last_positive = -1;
  for (int j = 0; j < static_cast<int>(dist.size()); ++j) {
    if (dist[j] <= 0.0) continue;
    last_positive = j;
    cum += dist[j];
    if (u < cum) return j;
  }
  return last_positive;  // u landed in the rounding gap at the top of the CDF
}

}  // namespace

Sequence sample_sequence(const Policy& policy, Rng& rng) {
  Sequence seq;
  int prev = kStart;
  for (int pos = 1; pos <= policy.l_max + 1; ++pos) {
    const std::vector<double> dist = next_token_dist(policy, pos, prev);
    const int tok = categorical_draw(dist, rng);
    seq.tokens.push_back(tok);
    if (tok == policy.vocab.eos_id()) break;
    prev = tok;
  }
  return seq;
}

void add_grad_log_prob(const Policy& policy, const Sequence& seq, double weight,
                       GradVector& acc) {
  validate_sequence(policy, seq);
  const int n = policy.total_tokens();
  int prev = kStart;
  for (int t = 1; t <= seq.length(); ++t) {
    const int tok = seq.tokens[t - 1];
    if (t == policy.l_max + 1) break;  // forced EOS: constant distribution
    const std::vector<double> dist = next_token_dist(policy, t, prev);
    const std::size_t base = policy.row_offset(t, prev);
    for (int j = 0; j < n; ++j) acc.values[base + j] -= weight * dist[j];
    acc.values[base + tok] += weight;
    prev = tok;
  }
}

GradVector grad_log_prob(const Policy& policy, const Sequence& seq) {
  GradVector g = GradVector::zeros(policy.param_count());
  add_grad_log_prob(policy, seq, 1.0, g);
  return g;
}

double token_entropy(const Policy& policy, int position, int prev) {
  if (position == policy.l_max + 1) {
    check_context(policy, position, prev);
    return 0.0;
  }
  const std::vector<double> dist = next_token_dist(policy, position, prev);
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double add_token_entropy_grad(const Policy& policy, int position, int prev,
                              double weight, GradVector& acc) {
  check_context(policy, position, prev);
  if (position == policy.l_max + 1) return 0.0;
  const int n = policy.total_tokens();
  const std::vector<double> dist = next_token_dist(policy, position, prev);
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log(p);
  const std::size_t base = policy.row_offset(position, prev);
  for (int j = 0; j < n; ++j) {
    const double p = dist[j];
    if (p > 0.0) acc.values[base + j] -= weight * p * (std::log(p) + h);
  }
  return h;
}

TokenEntropy token_entropy_and_grad(const Policy& policy, int position, int prev) {
  TokenEntropy out;
  out.grad = GradVector::zeros(policy.param_count());
  out.entropy = add_token_entropy_grad(policy, position, prev, 1.0, out.grad);
  return out;
}

std::string policy_to_json(const Policy& policy) {
  nlohmann::ordered_json j;
  j["content_size"] = policy.vocab.content_size;
  j["l_max"] = policy.l_max;
  j["logits"] = policy.logits;
  return j.dump();
}

Policy policy_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Policy p = uniform_policy(Vocab{j.at("content_size").get<int>()}, j.at("l_max").get<int>());
  std::vector<double> logits = j.at("logits").get<std::vector<double>>();
  if (logits.size() != p.param_count())
    throw ContractViolation("logit array has wrong length for the declared shape");
  p.logits = std::move(logits);
  return p;
}

}  // namespace emlab
