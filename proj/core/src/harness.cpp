#include "emlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <thread>

#include "emlab/estimators.hpp"
#include "emlab/oracle.hpp"

namespace emlab {

namespace {

constexpr double kTargetLogitBoost = 5.0;

// Sub-stream tags under an episode seed.
constexpr std::uint64_t kTargetStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kAdaptStream = 3;
constexpr std::uint64_t kEpisodeStream = 0xE5150DE;

}  // namespace

void AdaptConfig::validate() const {
  method.validate();
  if (steps < 1) throw ContractViolation("config needs steps >= 1");
  if (!(lr >= 0.0)) throw ContractViolation("config needs lr >= 0");
  if (!(tau >= 1.0)) throw ContractViolation("config needs tau >= 1");
  if (!(sigma >= 0.0)) throw ContractViolation("config needs sigma >= 0");
  if (episodes < 1) throw ContractViolation("config needs episodes >= 1");
  if (content_size < 1) throw ContractViolation("config needs content_size >= 1");
  if (l_max < 3) throw ContractViolation("config needs l_max >= 3 for target lengths in [2, l_max - 1]");
  if (!(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0) ||
      !(adamw.beta2 >= 0.0 && adamw.beta2 < 1.0))
    throw ContractViolation("adamw betas must lie in [0, 1)");
  if (!(adamw.eps > 0.0)) throw ContractViolation("adamw eps must be positive");
  if (!(adamw.weight_decay >= 0.0)) throw ContractViolation("weight decay must be >= 0");
}

Episode generate_episode(const AdaptConfig& config, int index) {
  config.validate();
  const std::uint64_t episode_seed =
      derive_seed(derive_seed(config.seed, kEpisodeStream), static_cast<std::uint64_t>(index));

  const Vocab vocab{config.content_size};
  Rng target_rng(derive_seed(episode_seed, kTargetStream));
  const int len = target_rng.next_int(2, config.l_max - 1);
  Sequence target;
  for (int t = 0; t < len; ++t)
    target.tokens.push_back(target_rng.next_int(0, vocab.content_size - 1));
  target.tokens.push_back(vocab.eos_id());

  Policy clean = uniform_policy(vocab, config.l_max);
  int prev = kStart;
  for (int t = 1; t <= target.length(); ++t) {
    clean.logit(t, prev, target.tokens[t - 1]) += kTargetLogitBoost;
    prev = target.tokens[t - 1];
  }

  Rng noise_rng(derive_seed(episode_seed, kNoiseStream));
  Policy source = clean;
  for (double& v : source.logits) v = v / config.tau + config.sigma * noise_rng.next_normal();

  return Episode{std::move(target), std::move(source), episode_seed};
}

double token_error_rate(const Sequence& hyp, const Sequence& ref) {
  const auto content = [](const Sequence& s) {
    return std::vector<int>(s.tokens.begin(), s.tokens.empty() ? s.tokens.end() : s.tokens.end() - 1);
  };
  const std::vector<int> h = content(hyp);
  const std::vector<int> r = content(ref);
  if (r.empty()) throw ContractViolation("token_error_rate needs a non-empty reference");

  const std::size_t n = h.size(), m = r.size();
  std::vector<std::size_t> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (h[i - 1] == r[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return static_cast<double>(row[m]) / static_cast<double>(m);
}

Optimizer::Optimizer(OptimizerKind kind, double lr, const AdamWParams& params, std::size_t n)
    : kind_(kind), lr_(lr), p_(params) {
  if (kind_ == OptimizerKind::AdamW) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }
}

bool Optimizer::step(std::vector<double>& params, const GradVector& grad) {
  if (!grad.all_finite()) return false;
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr_ * grad.values[k];
    return true;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grad.values[k];
    m_[k] = p_.beta1 * m_[k] + (1.0 - p_.beta1) * g;
    v_[k] = p_.beta2 * v_[k] + (1.0 - p_.beta2) * g * g;
    const double m_hat = m_[k] / bc1;
    const double v_hat = v_[k] / bc2;
    params[k] -= lr_ * (m_hat / (std::sqrt(v_hat) + p_.eps) + p_.weight_decay * params[k]);
  }
  return true;
}

namespace {

// The leave-one-out baseline needs a second candidate; with g = 1 the suite
// silently falls back to no baseline.
ObjectiveSpec effective_method(const ObjectiveSpec& requested) {
  ObjectiveSpec spec = requested;
  if (spec.g == 1 && spec.baseline == Baseline::Loo) spec.baseline = Baseline::None;
  return spec;
}

CandidateSet make_candidates(const Policy& policy, const ObjectiveSpec& spec, Rng& rng) {
  switch (spec.source) {
    case CandidateSource::Sampled:
      return sample_batch(policy, spec.g, rng);
    case CandidateSource::Beam:
      return beam_search(policy, spec.g);
    case CandidateSource::Greedy: {
      CandidateSet set;
      set.source = CandidateSource::Greedy;
      Sequence y = greedy_decode(policy);
      set.logps.push_back(sequence_log_prob(policy, y));
      set.seqs.push_back(std::move(y));
      return set;
    }
  }
  throw ContractViolation("unknown candidate source");
}

}  // namespace

EpisodeReport adapt_episode(const Episode& episode, const AdaptConfig& config) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  EpisodeReport report;
  Policy policy = episode.source_policy;  // private copy; reset = scope exit
  report.entropy_initial = oracle::exact_entropy(policy);
  report.ter_unadapted = token_error_rate(greedy_decode(policy), episode.target);

  ObjectiveSpec method = effective_method(config.method);
  Optimizer opt(config.optimizer, config.lr, config.adamw, policy.param_count());
  Rng rng(derive_seed(episode.seed, kAdaptStream));

  const EstimatorKind trace_kind =
      method.kind == ObjectiveKind::EmSeq ? EstimatorKind::Seq : EstimatorKind::Tok;

  for (int step = 0; step < config.steps; ++step) {
    CandidateSet cands = make_candidates(policy, method, rng);
    ObjectiveSpec step_spec = method;
    if (cands.size() != step_spec.g) {
      // Beam search can return fewer completions than requested on tiny
      // supports; shrink the group rather than fail the episode.
      step_spec.g = cands.size();
      step_spec = effective_method(step_spec);
    }
    const GradVector grad = objective_gradient(policy, cands, step_spec);

    StepTrace trace;
    double h_sum = 0.0;
    for (const Sequence& y : cands.seqs) h_sum += estimator_value(policy, y, trace_kind);
    trace.mean_h = h_sum / cands.size();
    trace.grad_norm = grad.l2_norm();
    report.per_step.push_back(trace);

    if (!opt.step(policy.logits, grad)) {
      report.failed = true;
      break;
    }
  }

  const Sequence hyp = greedy_decode(policy);
  report.ter = token_error_rate(hyp, episode.target);
  report.exact_match = hyp.tokens == episode.target.tokens;
  report.entropy_final = oracle::exact_entropy(policy);
  report.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

namespace {

void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  const int worker_count = std::min(jobs, n);
  workers.reserve(worker_count);
  for (int w = 0; w < worker_count; ++w) {
    workers.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        body(i);
      }
    });
  }
  for (std::thread& t : workers) t.join();
}

std::string source_name(CandidateSource source) {
  switch (source) {
    case CandidateSource::Sampled: return "sampled";
    case CandidateSource::Beam: return "beam";
    case CandidateSource::Greedy: return "greedy";
  }
  return "?";
}

}  // namespace

std::vector<SuiteRow> run_suite(const AdaptConfig& base, const SweepGrid& grid, int jobs) {
  base.validate();
  const std::vector<std::string> methods =
      grid.methods.empty() ? std::vector<std::string>{method_name(base.method)} : grid.methods;
  const std::vector<int> gs = grid.g.empty() ? std::vector<int>{base.method.g} : grid.g;
  const std::vector<int> steps_list = grid.steps.empty() ? std::vector<int>{base.steps} : grid.steps;

  // One shared episode list: generation ignores method, g and steps.
  std::vector<Episode> episodes(base.episodes);
  parallel_for(base.episodes, jobs, [&](int i) { episodes[i] = generate_episode(base, i); });

  std::vector<SuiteRow> rows;
  for (const std::string& name : methods) {
    for (int g : gs) {
      for (int steps : steps_list) {
        AdaptConfig cfg = base;
        ObjectiveSpec requested = make_method(name, g);
        requested.ent_norm_per_candidate = base.method.ent_norm_per_candidate;
        cfg.method = effective_method(requested);
        if (requested.baseline == Baseline::Loo && requested.g == 1)
          std::fprintf(stderr,
                       "note: %s with g = 1 has no leave-one-out baseline; "
                       "running without a baseline\n",
                       name.c_str());
        cfg.steps = steps;

        std::vector<EpisodeReport> reports(episodes.size());
        parallel_for(static_cast<int>(episodes.size()), jobs,
                     [&](int i) { reports[i] = adapt_episode(episodes[i], cfg); });

        SuiteRow row;
        row.method = name;
        row.source = source_name(cfg.method.source);
        row.g = cfg.method.g;
        row.steps = steps;
        row.lr = cfg.lr;
        row.tau = cfg.tau;
        row.sigma = cfg.sigma;
        row.episodes = static_cast<int>(episodes.size());

        double mean_ter = 0.0, m2_ter = 0.0;
        int count = 0;
        for (const EpisodeReport& r : reports) {
          if (r.failed) ++row.failures;
          ++count;
          const double d = r.ter - mean_ter;
          mean_ter += d / count;
          m2_ter += d * (r.ter - mean_ter);
          row.mean_exact_match += r.exact_match ? 1.0 : 0.0;
          row.mean_entropy_initial += r.entropy_initial;
          row.mean_entropy_final += r.entropy_final;
          row.mean_runtime_s += r.runtime_s;
        }
        row.mean_ter = mean_ter;
        row.std_ter = count > 1 ? std::sqrt(m2_ter / (count - 1)) : 0.0;
        row.mean_exact_match /= count;
        row.mean_entropy_initial /= count;
        row.mean_entropy_final /= count;
        row.mean_runtime_s /= count;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string suite_csv_header() {
  return "method,source,g,steps,lr,tau,sigma,episodes,mean_ter,std_ter,"
         "mean_exact_match,mean_entropy_initial,mean_entropy_final,"
         "mean_runtime_s,failures";
}

std::string suite_row_csv(const SuiteRow& r) {
  std::string line;
  line += r.method;
  line += ',' + r.source;
  line += ',' + std::to_string(r.g);
  line += ',' + std::to_string(r.steps);
  line += ',' + fmt_double(r.lr);
  line += ',' + fmt_double(r.tau);
  line += ',' + fmt_double(r.sigma);
  line += ',' + std::to_string(r.episodes);
  line += ',' + fmt_double(r.mean_ter);
  line += ',' + fmt_double(r.std_ter);
  line += ',' + fmt_double(r.mean_exact_match);
  line += ',' + fmt_double(r.mean_entropy_initial);
  line += ',' + fmt_double(r.mean_entropy_final);
  line += ',' + fmt_double(r.mean_runtime_s);
  line += ',' + std::to_string(r.failures);
  return line;
}

std::string rows_to_csv(const std::vector<SuiteRow>& rows) {
  std::string out = suite_csv_header() + "\n";
  for (const SuiteRow& r : rows) out += suite_row_csv(r) + "\n";
  return out;
}

}  // namespace emlab
