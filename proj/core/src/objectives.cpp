#include "emlab/objectives.hpp"

#include <cmath>
#include <string>

#include "emlab/estimators.hpp"

namespace emlab {

void ObjectiveSpec::validate() const {
  if (g < 1) throw ContractViolation("objective needs g >= 1");
  if (kind == ObjectiveKind::GreedyEm) {
    if (g != 1) throw ContractViolation("greedy-em uses exactly one candidate");
    if (source != CandidateSource::Greedy)
      throw ContractViolation("greedy-em requires greedy candidates");
    if (baseline != Baseline::None)
      throw ContractViolation("greedy-em takes no baseline");
  } else if (source == CandidateSource::Greedy) {
    throw ContractViolation("greedy candidates are exclusive to greedy-em");
  }
  if (baseline == Baseline::Loo && g < 2)
    throw ContractViolation("leave-one-out baseline needs g >= 2");
}

AdvantageSet advantages(const std::vector<double>& h_values, Baseline baseline) {
  const int g = static_cast<int>(h_values.size());
  if (g < 1) throw ContractViolation("advantages need at least one value");
  AdvantageSet out;
  out.values.resize(g);
  if (baseline == Baseline::None) {
    out.values = h_values;
    return out;
  }
  if (g < 2) throw ContractViolation("leave-one-out baseline needs g >= 2");
  double sum = 0.0;
  for (double h : h_values) sum += h;
  for (int i = 0; i < g; ++i)
    out.values[i] = h_values[i] - (sum - h_values[i]) / (g - 1);
  return out;
}

GradVector objective_gradient(const Policy& policy, const CandidateSet& cands,
                              const ObjectiveSpec& spec) {
  spec.validate();
  if (cands.size() != spec.g)
    throw ContractViolation("candidate count does not match the objective spec");
  if (cands.source != spec.source)
    throw ContractViolation("candidate source does not match the objective spec");
  if (cands.logps.size() != cands.seqs.size())
    throw ContractViolation("candidate set is missing log-probs");
  for (int i = 0; i < cands.size(); ++i) {
    validate_sequence(policy, cands.seqs[i]);
    if (std::abs(cands.logps[i] - sequence_log_prob(policy, cands.seqs[i])) > 1e-10)
      throw ContractViolation("candidate log-probs are stale for this policy");
  }

  const int g = spec.g;
  const bool pg_term = spec.kind == ObjectiveKind::EmTok ||
                       spec.kind == ObjectiveKind::EmSeq ||
                       spec.kind == ObjectiveKind::PgTok;
  const bool ent_term = spec.kind == ObjectiveKind::EmTok ||
                        spec.kind == ObjectiveKind::EntTok ||
                        spec.kind == ObjectiveKind::GreedyEm;

  double denom = static_cast<double>(g);
  if (spec.normalization == Normalization::DapoToken) {
    long total_tokens = 0;
    for (const Sequence& y : cands.seqs) total_tokens += y.length();
    denom = static_cast<double>(total_tokens);
  }
  const double ent_denom =
      (spec.normalization == Normalization::DapoToken && spec.ent_norm_per_candidate)
          ? static_cast<double>(g)
          : denom;

  GradVector grad = GradVector::zeros(policy.param_count());

  if (pg_term) {
    // sg(.) weights: the entropy estimates enter as constants.
    std::vector<double> h(g);
    for (int i = 0; i < g; ++i) {
      h[i] = spec.kind == ObjectiveKind::EmSeq ? -cands.logps[i]
                                               : h_tok(policy, cands.seqs[i]);
    }
    const AdvantageSet adv = advantages(h, spec.baseline);
    for (int i = 0; i < g; ++i)
      add_grad_log_prob(policy, cands.seqs[i], adv.values[i] / denom, grad);
  }

  if (ent_term) {
    for (int i = 0; i < g; ++i) {
      const Sequence& y = cands.seqs[i];
      int prev = kStart;
      for (int t = 1; t <= y.length(); ++t) {
        add_token_entropy_grad(policy, t, prev, 1.0 / ent_denom, grad);
        prev = y.tokens[t - 1];
      }
    }
  }

  return grad;
}

namespace {

struct MethodEntry {
  const char* name;
  ObjectiveKind kind;
  CandidateSource source;
};

constexpr MethodEntry kMethods[] = {
    {"em-tok", ObjectiveKind::EmTok, CandidateSource::Sampled},
    {"em-tok-b", ObjectiveKind::EmTok, CandidateSource::Beam},
    {"em-seq", ObjectiveKind::EmSeq, CandidateSource::Sampled},
    {"em-seq-b", ObjectiveKind::EmSeq, CandidateSource::Beam},
    {"pg-tok", ObjectiveKind::PgTok, CandidateSource::Sampled},
    {"pg-tok-b", ObjectiveKind::PgTok, CandidateSource::Beam},
    {"ent-tok", ObjectiveKind::EntTok, CandidateSource::Sampled},
    {"ent-tok-b", ObjectiveKind::EntTok, CandidateSource::Beam},
    {"greedy-em", ObjectiveKind::GreedyEm, CandidateSource::Greedy},
};

}  // namespace

ObjectiveSpec make_method(std::string_view name, int g) {
  for (const MethodEntry& m : kMethods) {
    if (name != m.name) continue;
    ObjectiveSpec spec;
    spec.kind = m.kind;
    spec.source = m.source;
    if (m.kind == ObjectiveKind::GreedyEm) {
      spec.g = 1;
      spec.baseline = Baseline::None;
      spec.normalization = Normalization::None;
    } else {
      spec.g = g;
      spec.baseline = Baseline::Loo;
      spec.normalization = Normalization::DapoToken;
    }
    return spec;
  }
  throw ContractViolation("unknown method name: " + std::string(name));
}

std::string method_name(const ObjectiveSpec& spec) {
  for (const MethodEntry& m : kMethods)
    if (m.kind == spec.kind && m.source == spec.source) return m.name;
  throw ContractViolation("objective spec has no canonical method name");
}

std::vector<std::string> known_method_names() {
  std::vector<std::string> names;
  for (const MethodEntry& m : kMethods) names.emplace_back(m.name);
  return names;
}

}  // namespace emlab
