#include "btdkit/experiments.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <json.hpp>
#include <sstream>

using namespace btd;
using btd::test::rel_diff;

TEST_CASE("synth_btd_tensor") {
  SynthSpec spec;
  spec.seed = 5;
  const SynthTensor clean = synth_btd_tensor(spec);
  CHECK(clean.observed.dims() == Dims{5, 6, 7});
  CHECK(clean.truth.A.rows() == 5);
  CHECK(clean.truth.A.cols() == 6);
  CHECK(clean.truth.B.rows() == 6);
  CHECK(clean.truth.C.rows() == 7);
  CHECK(clean.truth.C.cols() == 3);
  CHECK(frobenius_norm(clean.observed) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rel_diff(test::as_matrix(clean.observed), test::as_matrix(reconstruct_btd(clean.truth, spec.dims))) <=
        1e-14);

  for (double sigma : {1e-4, 1e-2, 0.5}) {
    spec.sigma_noise = sigma;
    const SynthTensor noisy = synth_btd_tensor(spec);
    const Matrix diff = test::as_matrix(noisy.observed) - test::as_matrix(clean.observed);
    CHECK(std::abs(diff.norm() - sigma) <= 1e-12);
    CHECK(noisy.truth.C == clean.truth.C);
  }

  spec.sigma_noise = 0.0;
  spec.nonneg = true;
  const SynthTensor pos = synth_btd_tensor(spec);
  CHECK((pos.truth.A.array() >= 0.0).all());
  CHECK((pos.truth.C.array() >= 0.0).all());

  CHECK(synth_btd_tensor(spec).observed == pos.observed);
  spec.sigma_noise = -1.0;
  CHECK_THROWS(synth_btd_tensor(spec));
}

TEST_CASE("median and loglog_slope") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  McReport r;
  for (double s : {1e-4, 1e-3, 1e-2}) {
    McLevel l;
    l.sigma = s;
    l.median_error = 3.0 * s * s;
    r.levels.push_back(l);
  }
  CHECK(loglog_slope(r, 1e-4, 1e-2) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("small Monte Carlo") {
  McConfig cfg = McConfig::defaults();
  cfg.runs = 4;
  cfg.levels = {0.0, 1e-3, 1e-2};
  cfg.base.seed = 3;
  const McReport r = run_monte_carlo(cfg);
  REQUIRE(r.levels.size() == 3);
  for (const McLevel& l : r.levels) {
    CHECK(l.errors.size() + l.failed_runs.size() == 4);
    for (double e : l.errors) CHECK(e >= 0.0);
  }
  CHECK(r.levels[0].median_error <= 1e-3);
  CHECK(r.levels[0].median_error <= r.levels[1].median_error);
  CHECK(r.levels[1].median_error <= r.levels[2].median_error);

  cfg.threads = 3;
  const McReport threaded = run_monte_carlo(cfg);
  std::ostringstream a, b;
  write_mc_json(a, r);
  write_mc_json(b, threaded);
  CHECK(a.str() == b.str());

  const auto j = nlohmann::json::parse(a.str());
  CHECK(j["schema_version"] == 1);
  CHECK(j["kind"] == "monte_carlo");
  CHECK(j["levels"].size() == 3);

  std::ostringstream csv;
  write_mc_csv(csv, r);
  CHECK(csv.str().rfind("sigma,run,error\n", 0) == 0);
}

TEST_CASE("swamp bench with lambda0 = 0 gives identical traces") {
  SwampConfig cfg = SwampConfig::defaults();
  cfg.instances = 2;
  cfg.base.dims = {5, 6, 7};
  cfg.base.L = 2;
  cfg.base.R = 2;
  for (SolverConfig* s : {&cfg.als, &cfg.rals}) {
    s->L = 2;
    s->R = 2;
    s->max_sweeps = 300;
  }
  cfg.rals.regularization = LambdaSchedule{0.0, 0.95, 0.0};
  const SwampReport r = run_swamp_bench(cfg);
  REQUIRE(r.runs.size() == 2);
  for (const SwampRun& run : r.runs) {
    CHECK(run.als.objective_trace[0] == run.rals.objective_trace[0]);
    REQUIRE(run.als.objective_trace.size() == run.rals.objective_trace.size());
    for (std::size_t n = 0; n < run.als.objective_trace.size(); ++n)
      CHECK(std::abs(run.als.objective_trace[n] - run.rals.objective_trace[n]) <=
            1e-12 * std::max(run.als.objective_trace[n], 1e-300));
  }
}

TEST_CASE("swamp bench shares initializations and writes reports") {
  SwampConfig cfg = SwampConfig::defaults();
  cfg.instances = 2;
  cfg.base.seed = 11;
  for (SolverConfig* s : {&cfg.als, &cfg.rals}) s->max_sweeps = 40;
  const SwampReport r = run_swamp_bench(cfg);
  for (const SwampRun& run : r.runs) {
    CHECK(run.als.objective_trace[0] == run.rals.objective_trace[0]);
    CHECK(run.als.lambda_trace[1] == 0.0);
    CHECK(run.rals.lambda_trace[1] == 1.0);
  }
  std::ostringstream js;
  write_swamp_json(js, r);
  const auto j = nlohmann::json::parse(js.str());
  CHECK(j["schema_version"] == 1);
  CHECK(j["kind"] == "swamp");
  CHECK(j["runs"].size() == 2);

  std::ostringstream csv;
  write_swamp_csv(csv, r, 10);
  const std::string text = csv.str();
  CHECK(text.rfind("instance,method,sweep,lambda,objective,relative_residual\n", 0) == 0);
}
