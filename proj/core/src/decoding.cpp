#include "emlab/decoding.hpp"

#include <algorithm>
#include <cmath>

namespace emlab {

Sequence greedy_decode(const Policy& policy) {
  Sequence seq;
  int prev = kStart;
  for (int pos = 1; pos <= policy.l_max + 1; ++pos) {
    const std::vector<double> dist = next_token_dist(policy, pos, prev);
    const int tok = static_cast<int>(
        std::max_element(dist.begin(), dist.end()) - dist.begin());
    seq.tokens.push_back(tok);
    if (tok == policy.vocab.eos_id()) break;
    prev = tok;
  }
  return seq;
}

CandidateSet sample_batch(const Policy& policy, int g, Rng& rng) {
  if (g < 1) throw ContractViolation("sample_batch needs g >= 1");
  CandidateSet set;
  set.source = CandidateSource::Sampled;
  set.seqs.reserve(g);
  set.logps.reserve(g);
  for (int i = 0; i < g; ++i) {
    Sequence y = sample_sequence(policy, rng);
    set.logps.push_back(sequence_log_prob(policy, y));
    set.seqs.push_back(std::move(y));
  }
  return set;
}

namespace {

struct Hyp {
  std::vector<int> tokens;
  double logp = 0.0;
  bool done = false;
};

// Higher log-prob first; exact ties go to the lexicographically smaller
// token sequence.
bool beam_order(const Hyp& a, const Hyp& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(),
                                      b.tokens.begin(), b.tokens.end());
}

}  // namespace

CandidateSet beam_search(const Policy& policy, int g) {
  if (g < 1) throw ContractViolation("beam_search needs g >= 1");
  const int eos = policy.vocab.eos_id();

  std::vector<Hyp> beam{Hyp{}};
  bool any_live = true;
  while (any_live) {
    std::vector<Hyp> expanded;
    expanded.reserve(beam.size() * policy.total_tokens());
    for (const Hyp& h : beam) {
      if (h.done) {
        expanded.push_back(h);
        continue;
      }
      const int pos = static_cast<int>(h.tokens.size()) + 1;
      const int prev = h.tokens.empty() ? kStart : h.tokens.back();
      const std::vector<double> dist = next_token_dist(policy, pos, prev);
      for (int tok = 0; tok < policy.total_tokens(); ++tok) {
        if (dist[tok] <= 0.0) continue;  // outside the support
        Hyp next;
        next.tokens = h.tokens;
        next.tokens.push_back(tok);
        next.logp = h.logp + std::log(dist[tok]);
        next.done = (tok == eos);
        expanded.push_back(std::move(next));
      }
    }
    std::sort(expanded.begin(), expanded.end(), beam_order);
    if (static_cast<int>(expanded.size()) > g) expanded.resize(g);
    beam = std::move(expanded);
    any_live = std::any_of(beam.begin(), beam.end(),
                           [](const Hyp& h) { return !h.done; });
  }

  CandidateSet set;
  set.source = CandidateSource::Beam;
  set.underfilled = static_cast<int>(beam.size()) < g;
  for (Hyp& h : beam) {
    set.seqs.push_back(Sequence{std::move(h.tokens)});
    set.logps.push_back(h.logp);
  }
  return set;
}

}  // namespace emlab
