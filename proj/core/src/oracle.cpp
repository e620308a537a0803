#include "emlab/oracle.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace emlab::oracle {

namespace {

// Depth-first walk over the support in token-id order. The visitor receives
// the token buffer (EOS included) and the accumulated log-prob.
template <typename Fn>
void walk_support(const Policy& policy, std::vector<int>& prefix, double logp, Fn&& fn) {
  const int pos = static_cast<int>(prefix.size()) + 1;
  const int prev = prefix.empty() ? kStart : prefix.back();
  const int eos = policy.vocab.eos_id();
  const std::vector<double> dist = next_token_dist(policy, pos, prev);
  for (int tok = 0; tok < policy.total_tokens(); ++tok) {
    if (dist[tok] <= 0.0) continue;
    const double lp = logp + std::log(dist[tok]);
    prefix.push_back(tok);
    if (tok == eos) {
      fn(prefix, lp);
    } else {
      walk_support(policy, prefix, lp, fn);
    }
    prefix.pop_back();
  }
}

void check_cap(const Policy& policy, std::size_t cap) {
  const std::size_t bound = support_bound(policy);
  if (bound > cap)
    throw CapacityError("support bound " + std::to_string(bound) +
                        " exceeds enumeration cap " + std::to_string(cap));
}

}  // namespace

std::size_t support_bound(const Policy& policy) {
  const std::size_t n = static_cast<std::size_t>(policy.vocab.content_size);
  std::size_t bound = 0;
  std::size_t pow = 1;
  for (int l = 0; l <= policy.l_max; ++l) {
    if (bound > std::numeric_limits<std::size_t>::max() - pow)
      return std::numeric_limits<std::size_t>::max();
    bound += pow;
    if (l < policy.l_max) {
      if (n != 0 && pow > std::numeric_limits<std::size_t>::max() / n)
        return std::numeric_limits<std::size_t>::max();
      pow *= n;
    }
  }
  return bound;
}

std::vector<SupportEntry> enumerate_support(const Policy& policy, std::size_t cap) {
  check_cap(policy, cap);
  std::vector<SupportEntry> out;
  std::vector<int> prefix;
  walk_support(policy, prefix, 0.0, [&](const std::vector<int>& toks, double lp) {
    out.push_back(SupportEntry{Sequence{toks}, lp, std::exp(lp)});
  });
  return out;
}

double exact_entropy(const Policy& policy, std::size_t cap) {
  check_cap(policy, cap);
  double h = 0.0;
  std::vector<int> prefix;
  walk_support(policy, prefix, 0.0, [&](const std::vector<int>&, double lp) {
    h -= std::exp(lp) * lp;
  });
  return h;
}

GradVector exact_entropy_gradient(const Policy& policy, std::size_t cap) {
  check_cap(policy, cap);
  GradVector grad = GradVector::zeros(policy.param_count());
  std::vector<int> prefix;
  walk_support(policy, prefix, 0.0, [&](const std::vector<int>& toks, double lp) {
    const double weight = std::exp(lp) * (-lp - 1.0);
    add_grad_log_prob(policy, Sequence{toks}, weight, grad);
  });
  return grad;
}

GradVector finite_difference_gradient(const std::function<double(const Policy&)>& f,
                                      const Policy& policy, double eps) {
  if (!(eps > 0.0)) throw ContractViolation("finite differences need eps > 0");
  GradVector grad = GradVector::zeros(policy.param_count());
  Policy probe = policy;
  for (std::size_t k = 0; k < probe.logits.size(); ++k) {
    const double saved = probe.logits[k];
    probe.logits[k] = saved + eps;
    const double hi = f(probe);
    probe.logits[k] = saved - eps;
    const double lo = f(probe);
    probe.logits[k] = saved;
    grad.values[k] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

GradVector expected_objective_gradient(const Policy& policy, const ObjectiveSpec& spec,
                                       std::size_t cap) {
  if (spec.g != 1 || spec.baseline != Baseline::None ||
      spec.normalization != Normalization::None)
    throw ContractViolation(
        "expected_objective_gradient takes the g = 1, baseline-free, "
        "normalization-free estimator");
  if (spec.kind == ObjectiveKind::GreedyEm)
    throw ContractViolation("greedy-em is not a sampled estimator");
  check_cap(policy, cap);

  GradVector out = GradVector::zeros(policy.param_count());
  std::vector<int> prefix;
  walk_support(policy, prefix, 0.0, [&](const std::vector<int>& toks, double lp) {
    CandidateSet single;
    single.source = spec.source;
    single.seqs.push_back(Sequence{toks});
    single.logps.push_back(lp);
    out.axpy(std::exp(lp), objective_gradient(policy, single, spec));
  });
  return out;
}

GradVector expected_objective_gradient_tuples(const Policy& policy,
                                              const ObjectiveSpec& spec,
                                              std::size_t cap) {
  spec.validate();
  if (spec.kind == ObjectiveKind::GreedyEm)
    throw ContractViolation("greedy-em is not a sampled estimator");
  const std::vector<SupportEntry> support = enumerate_support(policy, cap);
  const std::size_t m = support.size();
  double tuples = 1.0;
  for (int i = 0; i < spec.g; ++i) tuples *= static_cast<double>(m);
  if (tuples > static_cast<double>(cap))
    throw CapacityError("ordered tuple count exceeds enumeration cap");

  GradVector out = GradVector::zeros(policy.param_count());
  std::vector<std::size_t> idx(spec.g, 0);
  for (;;) {
    CandidateSet cands;
    cands.source = spec.source;
    double weight = 1.0;
    for (std::size_t i : idx) {
      cands.seqs.push_back(support[i].seq);
      cands.logps.push_back(support[i].log_prob);
      weight *= support[i].prob;
    }
    out.axpy(weight, objective_gradient(policy, cands, spec));
    // odometer increment
    int d = spec.g - 1;
    while (d >= 0 && ++idx[d] == m) idx[d--] = 0;
    if (d < 0) break;
  }
  return out;
}

ConstancyResult factorized_htok_constancy(const std::vector<std::vector<double>>& frame_dists,
                                          std::size_t cap) {
  if (frame_dists.empty()) throw ContractViolation("need at least one frame");
  double outcomes = 1.0;
  for (const std::vector<double>& d : frame_dists) {
    if (d.empty()) throw ContractViolation("empty frame distribution");
    double sum = 0.0;
    for (double p : d) {
      if (p < 0.0) throw ContractViolation("frame probabilities must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ContractViolation("frame distribution does not sum to 1");
    outcomes *= static_cast<double>(d.size());
  }
  if (outcomes > static_cast<double>(cap))
    throw CapacityError("factorized outcome count exceeds enumeration cap");

  const int t_len = static_cast<int>(frame_dists.size());
  const auto outcome_h = [&](const std::vector<int>&) {
    // Independent frames: the conditional at each step is the frame marginal,
    // whatever the outcome looks like.
    double h = 0.0;
    for (const std::vector<double>& d : frame_dists)
      for (double p : d)
        if (p > 0.0) h -= p * std::log(p);
    return h;
  };

  // First pass: probability-weighted mean of the estimate across outcomes.
  std::vector<int> idx(t_len, 0);
  double mass = 0.0, mean_acc = 0.0;
  for (;;) {
    double prob = 1.0;
    for (int t = 0; t < t_len; ++t) prob *= frame_dists[t][idx[t]];
    mean_acc += prob * outcome_h(idx);
    mass += prob;
    int d = t_len - 1;
    while (d >= 0 && ++idx[d] == static_cast<int>(frame_dists[d].size())) idx[d--] = 0;
    if (d < 0) break;
  }
  const double mean = mean_acc / mass;

  // Second pass: exact weighted variance around that mean.
  std::fill(idx.begin(), idx.end(), 0);
  double var_acc = 0.0;
  for (;;) {
    double prob = 1.0;
    for (int t = 0; t < t_len; ++t) prob *= frame_dists[t][idx[t]];
    const double dev = outcome_h(idx) - mean;
    var_acc += prob * dev * dev;
    int d = t_len - 1;
    while (d >= 0 && ++idx[d] == static_cast<int>(frame_dists[d].size())) idx[d--] = 0;
    if (d < 0) break;
  }
  return ConstancyResult{var_acc / mass, mean};
}

}  // namespace emlab::oracle
