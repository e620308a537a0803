#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "emlab/harness.hpp"
#include "emlab/oracle.hpp"
#include "test_fixtures.hpp"

using namespace emlab;
using namespace emlab::testing;

namespace {

AdaptConfig small_config() {
  AdaptConfig cfg;
  cfg.episodes = 8;
  cfg.steps = 3;
  cfg.method = make_method("em-tok", 4);
  return cfg;
}

}  // namespace

TEST_CASE("episodes are deterministic in (seed, index)") {
  const AdaptConfig cfg = small_config();
  const Episode a = generate_episode(cfg, 3);
  const Episode b = generate_episode(cfg, 3);
  CHECK(a.target.tokens == b.target.tokens);
  CHECK(a.source_policy.logits == b.source_policy.logits);
  CHECK(a.seed == b.seed);
  const Episode c = generate_episode(cfg, 4);
  CHECK(a.source_policy.logits != c.source_policy.logits);
}

TEST_CASE("episode targets are well-formed") {
  const AdaptConfig cfg = small_config();
  for (int i = 0; i < 100; ++i) {
    const Episode ep = generate_episode(cfg, i);
    const int content = ep.target.content_length();
    CHECK(content >= 2);
    CHECK(content <= cfg.l_max - 1);
    CHECK(ep.target.tokens.back() == ep.source_policy.vocab.eos_id());
    for (int t = 0; t < content; ++t) {
      CHECK(ep.target.tokens[t] >= 0);
      CHECK(ep.target.tokens[t] < cfg.content_size);
    }
  }
}

TEST_CASE("without corruption the source greedy-decodes to the target") {
  AdaptConfig cfg = small_config();
  cfg.tau = 1.0;
  cfg.sigma = 0.0;
  for (int i = 0; i < 25; ++i) {
    const Episode ep = generate_episode(cfg, i);
    CHECK(greedy_decode(ep.source_policy).tokens == ep.target.tokens);
    CHECK(token_error_rate(greedy_decode(ep.source_policy), ep.target) == 0.0);
  }
}

TEST_CASE("temperature flattens entropy but preserves the argmax") {
  AdaptConfig cool = small_config();
  cool.tau = 1.0;
  cool.sigma = 0.0;
  AdaptConfig hot = cool;
  hot.tau = 10.0;
  for (int i = 0; i < 10; ++i) {
    const Episode a = generate_episode(cool, i);
    const Episode b = generate_episode(hot, i);
    CHECK(a.target.tokens == b.target.tokens);
    CHECK(greedy_decode(b.source_policy).tokens == b.target.tokens);
    CHECK(oracle::exact_entropy(b.source_policy) > oracle::exact_entropy(a.source_policy));
  }
}

TEST_CASE("token error rate") {
  const Vocab v{3};
  CHECK(token_error_rate(with_eos({0, 1}, v), with_eos({0, 1}, v)) == 0.0);
  CHECK(token_error_rate(with_eos({0, 1}, v), with_eos({0, 2}, v)) == 0.5);
  CHECK(token_error_rate(with_eos({}, v), with_eos({0, 1, 2}, v)) == 1.0);
  CHECK(token_error_rate(with_eos({0, 1, 2}, v), with_eos({1}, v)) == 2.0);
  CHECK_THROWS_AS((void)token_error_rate(with_eos({0}, v), with_eos({}, v)),
                  ContractViolation);
}

TEST_CASE("sgd steps") {
  AdamWParams params;
  Optimizer opt(OptimizerKind::Sgd, 1.0, params, 3);
  std::vector<double> theta{1.0, 2.0, 3.0};
  SUBCASE("zero gradient is a no-op") {
    CHECK(opt.step(theta, GradVector::zeros(3)));
    CHECK(theta == std::vector<double>{1.0, 2.0, 3.0});
  }
  SUBCASE("unit learning rate subtracts the gradient") {
    GradVector g = GradVector::zeros(3);
    g.values[1] = 0.25;
    CHECK(opt.step(theta, g));
    CHECK(theta == std::vector<double>{1.0, 1.75, 3.0});
  }
}

TEST_CASE("adamw matches a hand-stepped reference") {
  AdamWParams params;  // 0.9 / 0.999 / 1e-8 / wd 0
  params.weight_decay = 0.1;
  const double lr = 1e-3;
  Optimizer opt(OptimizerKind::AdamW, lr, params, 3);
  std::vector<double> theta{1.0, -0.5, 0.0};
  const std::vector<std::vector<double>> grads{{0.5, -2.0, 0.0}, {-1.0, 1.0, 2.0}};

  std::vector<double> ref = theta;
  std::vector<double> m(3, 0.0), v(3, 0.0);
  for (std::size_t step = 0; step < grads.size(); ++step) {
    GradVector g{grads[step]};
    REQUIRE(opt.step(theta, g));
    const double t = static_cast<double>(step + 1);
    for (int k = 0; k < 3; ++k) {
      m[k] = params.beta1 * m[k] + (1 - params.beta1) * grads[step][k];
      v[k] = params.beta2 * v[k] + (1 - params.beta2) * grads[step][k] * grads[step][k];
      const double m_hat = m[k] / (1 - std::pow(params.beta1, t));
      const double v_hat = v[k] / (1 - std::pow(params.beta2, t));
      ref[k] -= lr * (m_hat / (std::sqrt(v_hat) + params.eps) + params.weight_decay * ref[k]);
    }
    for (int k = 0; k < 3; ++k) CHECK(theta[k] == doctest::Approx(ref[k]).epsilon(1e-15));
  }
}

TEST_CASE("adamw first step is the sign-scaled update") {
  AdamWParams params;
  Optimizer opt(OptimizerKind::AdamW, 1e-3, params, 2);
  std::vector<double> theta{0.0, 0.0};
  GradVector g{std::vector<double>{0.5, -2.0}};
  REQUIRE(opt.step(theta, g));
  CHECK(theta[0] == doctest::Approx(-1e-3 * 0.5 / (0.5 + params.eps)).epsilon(1e-12));
  CHECK(theta[1] == doctest::Approx(+1e-3 * 2.0 / (2.0 + params.eps)).epsilon(1e-12));
}

TEST_CASE("non-finite gradients leave parameters untouched") {
  AdamWParams params;
  Optimizer opt(OptimizerKind::AdamW, 1e-3, params, 2);
  std::vector<double> theta{1.0, 2.0};
  GradVector g = GradVector::zeros(2);
  g.values[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(opt.step(theta, g));
  CHECK(theta == std::vector<double>{1.0, 2.0});
  g.values[0] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(opt.step(theta, g));
  CHECK(theta == std::vector<double>{1.0, 2.0});
}

TEST_CASE("zero learning rate freezes the episode") {
  AdaptConfig cfg = small_config();
  cfg.lr = 0.0;
  const Episode ep = generate_episode(cfg, 1);
  const EpisodeReport rep = adapt_episode(ep, cfg);
  CHECK(rep.entropy_final == rep.entropy_initial);
  CHECK(rep.ter == rep.ter_unadapted);
  CHECK_FALSE(rep.failed);
  CHECK(rep.per_step.size() == static_cast<std::size_t>(cfg.steps));
}

TEST_CASE("clean episodes stay perfect under adaptation") {
  AdaptConfig cfg = small_config();
  cfg.tau = 1.0;
  cfg.sigma = 0.0;
  for (const char* name : {"em-tok", "em-seq", "em-tok-b", "greedy-em", "ent-tok"}) {
    cfg.method = make_method(name, 4);
    const Episode ep = generate_episode(cfg, 2);
    const EpisodeReport rep = adapt_episode(ep, cfg);
    CHECK(rep.ter_unadapted == 0.0);
    CHECK(rep.ter == 0.0);
    CHECK(rep.exact_match);
  }
}

TEST_CASE("adaptation neither mutates the episode nor leaks state") {
  const AdaptConfig cfg = small_config();
  const Episode ep1 = generate_episode(cfg, 0);
  const Episode ep2 = generate_episode(cfg, 1);
  const std::vector<double> logits_before = ep1.source_policy.logits;

  const EpisodeReport first = adapt_episode(ep1, cfg);
  CHECK(ep1.source_policy.logits == logits_before);

  (void)adapt_episode(ep2, cfg);  // interleave another episode
  const EpisodeReport again = adapt_episode(ep1, cfg);
  CHECK(again.entropy_initial == first.entropy_initial);
  CHECK(again.entropy_final == first.entropy_final);
  CHECK(again.ter == first.ter);
  CHECK(again.exact_match == first.exact_match);
  REQUIRE(again.per_step.size() == first.per_step.size());
  for (std::size_t i = 0; i < first.per_step.size(); ++i) {
    CHECK(again.per_step[i].mean_h == first.per_step[i].mean_h);
    CHECK(again.per_step[i].grad_norm == first.per_step[i].grad_norm);
  }
}

TEST_CASE("per-step traces follow the candidate estimator") {
  AdaptConfig cfg = small_config();
  cfg.steps = 2;
  const Episode ep = generate_episode(cfg, 5);
  const EpisodeReport rep = adapt_episode(ep, cfg);
  for (const StepTrace& t : rep.per_step) {
    CHECK(t.mean_h >= 0.0);
    CHECK(t.grad_norm >= 0.0);
  }
}

TEST_CASE("suite grid structure and labels") {
  AdaptConfig cfg = small_config();
  cfg.episodes = 4;
  SweepGrid grid;
  grid.methods = {"em-tok", "ent-tok"};
  grid.g = {1, 4};
  grid.steps = {2};
  const auto rows = run_suite(cfg, grid, 1);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "em-tok");
  CHECK(rows[0].source == "sampled");
  CHECK(rows[0].g == 1);
  CHECK(rows[1].g == 4);
  CHECK(rows[2].method == "ent-tok");
  for (const SuiteRow& r : rows) {
    CHECK(r.episodes == 4);
    CHECK(r.steps == 2);
    CHECK(r.failures == 0);
  }
}

TEST_CASE("greedy-em pins its group size in sweep rows") {
  AdaptConfig cfg = small_config();
  cfg.episodes = 2;
  SweepGrid grid;
  grid.methods = {"greedy-em"};
  grid.g = {4};
  grid.steps = {1};
  const auto rows = run_suite(cfg, grid, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].g == 1);
  CHECK(rows[0].source == "greedy");
}

TEST_CASE("suite results are independent of the worker count") {
  AdaptConfig cfg = small_config();
  cfg.episodes = 6;
  SweepGrid grid;
  grid.methods = {"em-tok", "em-seq"};
  const auto a = run_suite(cfg, grid, 1);
  const auto b = run_suite(cfg, grid, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mean_ter == b[i].mean_ter);
    CHECK(a[i].std_ter == b[i].std_ter);
    CHECK(a[i].mean_exact_match == b[i].mean_exact_match);
    CHECK(a[i].mean_entropy_initial == b[i].mean_entropy_initial);
    CHECK(a[i].mean_entropy_final == b[i].mean_entropy_final);
    CHECK(a[i].failures == b[i].failures);
  }
}

TEST_CASE("a non-finite gradient fails the episode instead of raising") {
  const AdaptConfig cfg = small_config();
  Episode broken = generate_episode(cfg, 0);
  broken.source_policy.logit(1, kStart, 0) = std::numeric_limits<double>::quiet_NaN();
  EpisodeReport rep;
  CHECK_NOTHROW(rep = adapt_episode(broken, cfg));
  CHECK(rep.failed);
  CHECK(rep.per_step.size() == 1);  // aborted at the first update
}

TEST_CASE("a single-candidate group runs without a baseline") {
  AdaptConfig cfg = small_config();
  cfg.episodes = 2;
  SweepGrid grid;
  grid.methods = {"em-tok"};
  grid.g = {1};
  const auto rows = run_suite(cfg, grid, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].g == 1);
  CHECK(rows[0].failures == 0);
}

TEST_CASE("material shift: adaptation reduces the token error rate") {
  // Reference run, seed 0: unadapted 0.268, em-tok G=16 0.2505.
  AdaptConfig cfg;
  cfg.sigma = 1.0;
  cfg.episodes = 200;
  const auto rows = run_suite(cfg, SweepGrid{}, 4);
  REQUIRE(rows.size() == 1);

  double unadapted = 0.0;
  for (int i = 0; i < cfg.episodes; ++i) {
    const Episode ep = generate_episode(cfg, i);
    unadapted += token_error_rate(greedy_decode(ep.source_policy), ep.target);
  }
  unadapted /= cfg.episodes;

  CHECK(unadapted == doctest::Approx(0.268).epsilon(0.02));
  CHECK(rows[0].mean_ter == doctest::Approx(0.2505).epsilon(0.02));
  CHECK(rows[0].mean_ter < unadapted);
  CHECK(rows[0].mean_entropy_final < rows[0].mean_entropy_initial);
}

TEST_CASE("config validation") {
  AdaptConfig cfg = small_config();
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = small_config();
  cfg.tau = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = small_config();
  cfg.sigma = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = small_config();
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = small_config();
  cfg.l_max = 2;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = small_config();
  cfg.lr = 0.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("csv layout") {
  CHECK(suite_csv_header() ==
        "method,source,g,steps,lr,tau,sigma,episodes,mean_ter,std_ter,"
        "mean_exact_match,mean_entropy_initial,mean_entropy_final,"
        "mean_runtime_s,failures");
  SuiteRow row;
  row.method = "em-tok";
  row.source = "sampled";
  row.g = 16;
  row.steps = 10;
  row.lr = 1e-3;
  row.tau = 2.0;
  row.sigma = 0.5;
  row.episodes = 200;
  const std::string line = suite_row_csv(row);
  CHECK(line.substr(0, 32) == "em-tok,sampled,16,10,0.001,2,0.5");
  CHECK(rows_to_csv({row}).find('\n') != std::string::npos);
}
