#include "btdkit/solver.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace btd;
using btd::test::rel_diff;

namespace {

double factor_diff(const BlockFactors& a, const BlockFactors& b) {
  return std::max({rel_diff(a.A, b.A), rel_diff(a.B, b.B), rel_diff(a.C, b.C)});
}

double step_sq(const BlockFactors& a, const BlockFactors& b) {
  return (a.A - b.A).squaredNorm() + (a.B - b.B).squaredNorm() + (a.C - b.C).squaredNorm();
}

Tensor3 exact_tensor(Dims d, Index L, Index R, std::uint64_t seed, BlockFactors* truth = nullptr) {
  Rng rng(seed);
  BlockFactors f = test::random_factors(d, L, R, rng);
  if (truth) *truth = f;
  return reconstruct_btd(f, d);
}

}  // namespace

TEST_CASE("init_factors") {
  const Dims d{10, 15, 28};
  const BlockFactors a = init_factors(d, 3, 3, InitStrategy::Gaussian, 7);
  const BlockFactors b = init_factors(d, 3, 3, InitStrategy::Gaussian, 7);
  CHECK(a.A == b.A);
  CHECK(a.B == b.B);
  CHECK(a.C == b.C);
  CHECK(a.A.rows() == 10);
  CHECK(a.A.cols() == 9);
  CHECK(a.B.rows() == 15);
  CHECK(a.B.cols() == 9);
  CHECK(a.C.rows() == 28);
  CHECK(a.C.cols() == 3);
  CHECK(init_factors(d, 3, 3, InitStrategy::Gaussian, 8).A != a.A);

  const BlockFactors u = init_factors(d, 2, 4, InitStrategy::UniformNonneg, 3);
  CHECK((u.A.array() >= 0.0).all());
  CHECK((u.B.array() >= 0.0).all());
  CHECK((u.C.array() >= 0.0).all());

  CHECK(init_factors(d, 3, 3, InitStrategy::Provided, 0, a).A == a.A);
  CHECK_THROWS(init_factors(d, 3, 3, InitStrategy::Provided, 0));
  CHECK_THROWS(init_factors({10, 15, 27}, 3, 3, InitStrategy::Provided, 0, a));
}

TEST_CASE("lambda_schedule") {
  CHECK(lambda_schedule(0, {1.0, 1.0, 0.0}) == 1.0);
  CHECK(lambda_schedule(50, {1.0, 1.0, 0.0}) == 1.0);
  CHECK(lambda_schedule(3, {1.0, 0.5, 0.0}) == 0.125);
  const LambdaSchedule floored{1.0, 0.5, 1e-6};
  double previous = lambda_schedule(0, floored);
  for (long n = 1; n < 100; ++n) {
    const double l = lambda_schedule(n, floored);
    CHECK(l <= previous);
    CHECK(l >= 1e-6);
    previous = l;
  }
  CHECK(previous == 1e-6);
  CHECK_THROWS(lambda_schedule(-1, floored));
}

TEST_CASE("als_sweep fixed point and descent") {
  BlockFactors truth = init_factors({4, 5, 6}, 2, 2, InitStrategy::Gaussian, 1);
  const Tensor3 t = exact_tensor({4, 5, 6}, 2, 2, 11, &truth);
  const BlockFactors next = als_sweep(t, truth, false);
  CHECK(btd_objective(t, next) <= 1e-20 * std::pow(frobenius_norm(t), 2));
  // the block splitting is unique only up to an invertible mixing inside each
  // block, so compare the model rather than the raw factors
  CHECK(rel_diff(test::as_matrix(reconstruct_btd(next, t.dims())), test::as_matrix(t)) <= 1e-10);
  CHECK(rel_diff(next.C, truth.C) <= 1e-10);

  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor3 x = test::random_tensor({5, 6, 7}, rng);
    const BlockFactors f = test::random_factors({5, 6, 7}, 2, 3, rng);
    CHECK(btd_objective(x, als_sweep(x, f, false)) < btd_objective(x, f));
  }
}

TEST_CASE("nonnegative sweeps keep factors nonnegative") {
  const Dims d{5, 6, 7};
  const BlockFactors truth = init_factors(d, 2, 2, InitStrategy::UniformNonneg, 4);
  const Tensor3 t = reconstruct_btd(truth, d);
  BlockFactors f = init_factors(d, 2, 2, InitStrategy::UniformNonneg, 5);
  for (int s = 0; s < 20; ++s) {
    f = s % 2 ? als_sweep(t, f, true) : rals_sweep(t, f, 0.5, true);
    CHECK((f.A.array() >= 0.0).all());
    CHECK((f.B.array() >= 0.0).all());
    CHECK((f.C.array() >= 0.0).all());
  }
}

TEST_CASE("rals_sweep with lambda = 0 is an ALS sweep") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor3 x = test::random_tensor({5, 6, 7}, rng);
    const BlockFactors f = test::random_factors({5, 6, 7}, 1 + trial % 2, 2 + trial % 2, rng);
    CHECK(factor_diff(rals_sweep(x, f, 0.0, false), als_sweep(x, f, false)) <= 1e-12);
  }
}

TEST_CASE("huge lambda freezes the factors") {
  Rng rng(78);
  const Tensor3 x = test::random_tensor({5, 6, 7}, rng);
  const BlockFactors f = test::random_factors({5, 6, 7}, 2, 2, rng);
  const BlockFactors g = rals_sweep(x, f, 1e12, false);
  CHECK((g.A - f.A).norm() <= 1e-6 * f.A.norm());
  CHECK((g.B - f.B).norm() <= 1e-6 * f.B.norm());
  CHECK((g.C - f.C).norm() <= 1e-6 * f.C.norm());
  CHECK_THROWS(rals_sweep(x, f, -1.0, false));
}

TEST_CASE("regularized A-update solves the normal equations") {
  Rng rng(404);
  for (double lambda : {0.0, 0.3, 2.0, 50.0}) {
    const Tensor3 x = test::random_tensor({2, 2, 2}, rng);
    const BlockFactors f = test::random_factors({2, 2, 2}, 1, 2, rng);
    // design for X_(1)^T, assembled entry by entry: row j + J*k, column r
    Matrix m(4, 2);
    for (Index k = 0; k < 2; ++k)
      for (Index j = 0; j < 2; ++j)
        for (Index r = 0; r < 2; ++r) m(j + 2 * k, r) = f.C(k, r) * f.B(j, r);
    Matrix x1t(4, 2);
    for (Index k = 0; k < 2; ++k)
      for (Index j = 0; j < 2; ++j)
        for (Index i = 0; i < 2; ++i) x1t(j + 2 * k, i) = x(i, j, k);
    const Matrix lhs = m.transpose() * m + lambda * Matrix::Identity(2, 2);
    const Matrix rhs = m.transpose() * x1t + lambda * f.A.transpose();
    const Matrix expected = lhs.fullPivLu().solve(rhs).transpose();
    CHECK(rel_diff(rals_sweep(x, f, lambda, false).A, expected) <= 1e-10);
  }
}

TEST_CASE("ALS objective is non-increasing") {
  Rng rng(555);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor3 x = test::random_tensor({5, 6, 7}, rng);
    BlockFactors f = test::random_factors({5, 6, 7}, 1 + trial % 2, 2 + trial % 2, rng);
    double previous = btd_objective(x, f);
    for (int s = 0; s < 50; ++s) {
      f = als_sweep(x, f, false);
      const double now = btd_objective(x, f);
      CHECK(now <= previous * (1 + 1e-12));
      previous = now;
    }
  }
}

TEST_CASE("RALS proximal decrease") {
  Rng rng(556);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor3 x = test::random_tensor({5, 6, 7}, rng);
    BlockFactors f = test::random_factors({5, 6, 7}, 2, 2, rng);
    for (int s = 0; s < 30; ++s) {
      const double lambda = lambda_schedule(s, LambdaSchedule{});
      const BlockFactors g = rals_sweep(x, f, lambda, false);
      const double before = btd_objective(x, f);
      CHECK(btd_objective(x, g) + lambda * step_sq(f, g) <= before * (1 + 1e-12));
      f = g;
    }
  }
}

TEST_CASE("fit from the ground truth stops immediately") {
  BlockFactors truth = init_factors({4, 5, 6}, 2, 2, InitStrategy::Gaussian, 0);
  const Tensor3 t = exact_tensor({4, 5, 6}, 2, 2, 21, &truth);
  SolverConfig cfg;
  cfg.L = 2;
  cfg.R = 2;
  cfg.init = InitStrategy::Provided;
  cfg.initial = truth;
  const FitReport rep = fit(t, cfg);
  CHECK(rep.converged);
  CHECK(rep.sweeps_used == 0);
  CHECK(rep.stop_reason == StopReason::ResidualReached);
  CHECK(rep.final_relative_residual() <= 1e-12);
  CHECK(rep.objective_trace.size() == 1);

  cfg.initial = init_factors({4, 5, 6}, 2, 2, InitStrategy::Gaussian, 9);
  cfg.max_sweeps = 0;
  const FitReport echo = fit(t, cfg);
  CHECK_FALSE(echo.converged);
  CHECK(echo.sweeps_used == 0);
  CHECK(echo.factors.A == cfg.initial->A);
  CHECK(echo.stop_reason == StopReason::MaxSweeps);
}

TEST_CASE("fit report traces and determinism") {
  Rng rng(8);
  const Tensor3 x = test::random_tensor({5, 6, 7}, rng);
  SolverConfig cfg;
  cfg.L = 2;
  cfg.R = 2;
  cfg.seed = 42;
  cfg.max_sweeps = 60;
  const FitReport a = fit(x, cfg);
  const FitReport b = fit(x, cfg);
  CHECK(a.objective_trace == b.objective_trace);
  CHECK(a.factors.C == b.factors.C);
  CHECK(a.objective_trace.size() == static_cast<std::size_t>(a.sweeps_used + 1));
  CHECK(a.lambda_trace.size() == a.objective_trace.size());
  CHECK(a.lambda_trace[0] == 0.0);
  CHECK(a.lambda_trace[1] == lambda_schedule(0, LambdaSchedule{}));
  CHECK(a.tensor_norm == doctest::Approx(frobenius_norm(x)).epsilon(1e-15));
  for (std::size_t n = 0; n < a.objective_trace.size(); ++n)
    CHECK(a.relative_residual_trace[n] ==
          doctest::Approx(std::sqrt(a.objective_trace[n]) / a.tensor_norm).epsilon(1e-14));

  std::ostringstream os;
  write_fit_report(os, a);
  const std::string text = os.str();
  CHECK(text.find("L 2\n") == 0);
  CHECK(text.find("trace\nsweep lambda objective relative_residual\n") != std::string::npos);
  const auto rows = std::count(text.begin(), text.end(), '\n');
  CHECK(rows >= static_cast<long>(a.objective_trace.size()) + 2);
}

TEST_CASE("fit stalls on a tensor it cannot fit") {
  Rng rng(9);
  const Tensor3 x = test::random_tensor({4, 4, 4}, rng);
  SolverConfig cfg;
  cfg.L = 1;
  cfg.R = 1;
  cfg.regularization.reset();
  cfg.tol_rel_objective = 1e-8;
  const FitReport rep = fit(x, cfg);
  CHECK_FALSE(rep.converged);
  CHECK(rep.stop_reason == StopReason::Stalled);
  CHECK(rep.sweeps_used < cfg.max_sweeps);
}

TEST_CASE("degenerate ranks warn but still run") {
  Rng rng(10);
  const Tensor3 x = test::random_tensor({2, 2, 3}, rng);
  SolverConfig cfg;
  cfg.L = 2;
  cfg.R = 4;
  cfg.max_sweeps = 5;
  cfg.regularization.reset();
  CHECK(is_rank_degenerate({2, 2, 3}, 2, 4));
  CHECK_FALSE(is_rank_degenerate({10, 15, 28}, 3, 3));
  const FitReport rep = fit(x, cfg);
  CHECK_FALSE(rep.warnings.empty());
  CHECK(rep.rank_deficient_solves > 0);
  CHECK(std::isfinite(rep.final_objective()));
}

TEST_CASE("SolverConfig validation") {
  Rng rng(1);
  const Tensor3 x = test::random_tensor({3, 3, 3}, rng);
  SolverConfig cfg;
  cfg.L = 0;
  CHECK_THROWS(fit(x, cfg));
  cfg = SolverConfig{};
  cfg.tol_residual = 0.0;
  CHECK_THROWS(fit(x, cfg));
  cfg = SolverConfig{};
  cfg.regularization = LambdaSchedule{1.0, 1.5, 0.0};
  CHECK_THROWS(fit(x, cfg));
  cfg = SolverConfig{};
  cfg.init = InitStrategy::Provided;
  CHECK_THROWS(fit(x, cfg));
}

TEST_CASE("objective_gradient") {
  BlockFactors truth = init_factors({3, 4, 5}, 2, 2, InitStrategy::Gaussian, 0);
  const Tensor3 t = exact_tensor({3, 4, 5}, 2, 2, 31, &truth);
  CHECK(objective_gradient(t, truth).norm() <= 1e-10 * std::pow(frobenius_norm(t), 2));

  const BlockFactors zero(Matrix::Zero(3, 4), Matrix::Zero(4, 4), Matrix::Zero(5, 2), 2, 2);
  CHECK(objective_gradient(t, zero).norm() == 0.0);

  Rng rng(32);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor3 x = test::random_tensor({3, 4, 5}, rng);
    BlockFactors f = test::random_factors({3, 4, 5}, 2, 2, rng);
    const Vector g = objective_gradient(x, f);
    REQUIRE(g.size() == (3 + 4) * 4 + 5 * 2);
    Index n = 0;
    for (Matrix* z : {&f.A, &f.B, &f.C}) {
      for (Index e = 0; e < z->size(); ++e, ++n) {
        const double keep = z->data()[e];
        z->data()[e] = keep + 1e-6;
        const double up = btd_objective(x, f);
        z->data()[e] = keep - 1e-6;
        const double down = btd_objective(x, f);
        z->data()[e] = keep;
        CHECK(std::abs((up - down) / 2e-6 - g(n)) <= 1e-5 * std::abs(g(n)));
      }
    }
  }
}

TEST_CASE("align_factors") {
  Rng rng(61);
  const Matrix ref = test::random_matrix(7, 3, rng);
  const Alignment same = align_factors(ref, ref);
  CHECK(same.error <= 1e-15);
  CHECK(same.permutation == std::vector<Index>{0, 1, 2});
  for (double s : same.scales) CHECK(s == doctest::Approx(1.0).epsilon(1e-14));

  Matrix swapped(7, 3);
  swapped.col(0) = ref.col(1);
  swapped.col(1) = 2.0 * ref.col(0);
  swapped.col(2) = ref.col(2);
  const Alignment sw = align_factors(ref, swapped);
  CHECK(sw.error <= 1e-14);
  CHECK(sw.permutation == std::vector<Index>{1, 0, 2});
  CHECK(sw.scales[0] == doctest::Approx(0.5).epsilon(1e-14));

  // exhaustive oracle over all 6 permutations with least-squares scales
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix est = ref + 0.05 * ref.norm() / std::sqrt(21.0) * test::random_matrix(7, 3, rng);
    const double delta = (est - ref).norm() / ref.norm();
    std::vector<Index> perm{0, 1, 2};
    double best = std::numeric_limits<double>::infinity();
    do {
      double sq = 0.0;
      for (Index r = 0; r < 3; ++r) {
        const Vector e = est.col(perm[static_cast<std::size_t>(r)]);
        const double s = e.dot(ref.col(r)) / e.squaredNorm();
        sq += (ref.col(r) - s * e).squaredNorm();
      }
      best = std::min(best, std::sqrt(sq) / ref.norm());
    } while (std::next_permutation(perm.begin(), perm.end()));
    const Alignment al = align_factors(ref, est);
    CHECK(al.error == doctest::Approx(best).epsilon(1e-12));
    CHECK(al.error <= delta);
  }

  // greedy branch above 8 columns
  const Matrix wide = test::random_matrix(40, 10, rng);
  std::vector<Index> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  Matrix shuffled(40, 10);
  for (Index c = 0; c < 10; ++c) shuffled.col(c) = -3.0 * wide.col(order[static_cast<std::size_t>(c)]);
  const Alignment g = align_factors(wide, shuffled);
  CHECK(g.error <= 1e-14);
  CHECK(g.permutation == order);

  CHECK_THROWS(align_factors(ref, test::random_matrix(7, 2, rng)));
}

TEST_CASE("L = 1 fits recover random CP tensors") {
  int hits = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor3 t = exact_tensor({5, 6, 7}, 1, 3, mix_seed(900, s));
    SolverConfig cfg;
    cfg.L = 1;
    cfg.R = 3;
    cfg.seed = s;
    cfg.tol_residual = 1e-6;
    cfg.max_sweeps = 5000;
    const FitReport rep = fit(t, cfg);
    if (rep.final_relative_residual() <= 1e-6) ++hits;
  }
  MESSAGE("CP recoveries: " << hits << "/20");
  CHECK(hits >= 12);
}

TEST_CASE("converged fits sit near a critical point") {
  int converged = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor3 t = exact_tensor({5, 6, 7}, 2, 2, mix_seed(901, s));
    SolverConfig cfg;
    cfg.L = 2;
    cfg.R = 2;
    cfg.seed = s;
    cfg.max_sweeps = 3000;
    const FitReport rep = fit(t, cfg);
    if (!rep.converged) continue;
    ++converged;
    CHECK(rep.gradient_norm / (rep.tensor_norm * rep.tensor_norm) <= 1e-3);
  }
  CHECK(converged > 0);
}
