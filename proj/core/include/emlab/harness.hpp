#pragma once

/**
 * Episodic test-time adaptation on synthetic domain-shifted episodes.
 *
 * Each episode pairs a ground-truth target sequence with a "shifted" source
 * policy: clean logits put a fixed boost on the target token at every context
 * the target visits, then the shift divides all logits by a temperature tau
 * and adds i.i.d. Gaussian noise. Adaptation runs a fixed number of steps on
 * a private copy of the source parameters (candidates are regenerated from
 * the current parameters before every step), greedy-decodes the adapted
 * policy, scores it against the target, and discards the adapted parameters.
 *
 * Episodes are a pure function of (seed, index) and never depend on the
 * method under test, so every grid cell of a sweep sees the identical
 * episode list.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "emlab/decoding.hpp"
#include "emlab/objectives.hpp"
#include "emlab/policy.hpp"

namespace emlab {

enum class OptimizerKind { AdamW, Sgd };

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  friend bool operator==(const AdamWParams&, const AdamWParams&) = default;
};

struct AdaptConfig {
  ObjectiveSpec method{};
  int steps = 10;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::AdamW;
  AdamWParams adamw{};
  int episodes = 200;
  double tau = 2.0;    // temperature flattening, >= 1
  double sigma = 0.5;  // logit noise std, >= 0
  int content_size = 3;
  int l_max = 6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Episode {
  Sequence target;
  Policy source_policy;
  std::uint64_t seed = 0;  // derived; drives the adaptation sampling stream
};

struct StepTrace {
  double mean_h = 0.0;  // mean estimator value over the step's candidates
  double grad_norm = 0.0;
};

struct EpisodeReport {
  double entropy_initial = 0.0;  // exact, via enumeration
  double entropy_final = 0.0;
  double ter = 0.0;  // token error rate of the adapted greedy decode
  bool exact_match = false;
  double ter_unadapted = 0.0;
  std::vector<StepTrace> per_step;
  double runtime_s = 0.0;  // wall clock, best effort
  bool failed = false;     // non-finite gradient encountered
};

// Deterministic in (config.seed, index).
Episode generate_episode(const AdaptConfig& config, int index);

// Unit-cost Levenshtein distance over content tokens (EOS stripped),
// divided by the reference content length.
double token_error_rate(const Sequence& hyp, const Sequence& ref);

// Per-episode optimizer state; moments reset with each new instance.
class Optimizer {
public:
  Optimizer(OptimizerKind kind, double lr, const AdamWParams& params, std::size_t n);

  // Applies one update in place. Returns false (leaving the parameters
  // untouched) if the gradient has a non-finite entry.
  bool step(std::vector<double>& params, const GradVector& grad);

private:
  OptimizerKind kind_;
  double lr_;
  AdamWParams p_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

// Runs the adapt-then-reset loop for one episode. The episode object is not
// modified; adapted parameters never escape.
EpisodeReport adapt_episode(const Episode& episode, const AdaptConfig& config);

struct SweepGrid {
  std::vector<std::string> methods;  // canonical method names
  std::vector<int> g;
  std::vector<int> steps;
};

struct SuiteRow {
  std::string method;
  std::string source;  // "sampled" | "beam" | "greedy"
  int g = 0;
  int steps = 0;
  double lr = 0.0;
  double tau = 0.0;
  double sigma = 0.0;
  int episodes = 0;
  double mean_ter = 0.0;
  double std_ter = 0.0;
  double mean_exact_match = 0.0;
  double mean_entropy_initial = 0.0;
  double mean_entropy_final = 0.0;
  double mean_runtime_s = 0.0;
  int failures = 0;
};

// Full grid over methods x g x steps; empty grid lists default to the base
// config's single value. All cells consume the identical episode list.
// jobs > 1 distributes episodes across threads; results are independent of
// the job count.
std::vector<SuiteRow> run_suite(const AdaptConfig& base, const SweepGrid& grid,
                                int jobs = 1);

std::string suite_csv_header();
std::string suite_row_csv(const SuiteRow& row);
std::string rows_to_csv(const std::vector<SuiteRow>& rows);

}  // namespace emlab
