#include "btdkit/solver.hpp"

#include "btdkit/nnls.hpp"
#include "btdkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace btd {

namespace {

struct Unfoldings {
  Matrix x1t;  // X_(1)^T, JK x I
  Matrix x2t;  // X_(2)^T, IK x J
  Matrix x3t;  // X_(3)^T, IJ x K

  explicit Unfoldings(const Tensor3& t)
      : x1t(matricize(t, 1).transpose()),
        x2t(matricize(t, 2).transpose()),
        x3t(matricize(t, 3).transpose()) {}
};

struct SweepStats {
  long rank_deficient = 0;
};

// argmin_Z ||rhs - design Z^T||^2 + lambda ||Z - prev||^2, returned as Z.
Matrix solve_block(const Matrix& design, const Matrix& rhs, const Matrix& prev, double lambda,
                   bool nonneg, SweepStats& stats) {
  LsProblem p;
  if (lambda > 0.0) {
    const double s = std::sqrt(lambda);
    const Index m = design.rows();
    const Index n = design.cols();
    p.design.resize(m + n, n);
    p.design.topRows(m) = design;
    p.design.bottomRows(n) = s * Matrix::Identity(n, n);
    p.rhs.resize(m + n, rhs.cols());
    p.rhs.topRows(m) = rhs;
    p.rhs.bottomRows(n) = s * prev.transpose();
  } else {
    p.design = design;
    p.rhs = rhs;
  }
  if (nonneg) return solve_nnls(p).transpose();
  LsSolution sol = solve_ls(p);
  if (sol.rank_deficient) ++stats.rank_deficient;
  return sol.x.transpose();
}

BlockFactors sweep(const Unfoldings& u, const BlockFactors& f, double lambda, bool nonneg,
                   SweepStats& stats) {
  BlockFactors next = f;
  next.A = solve_block(partitioned_khatri_rao(f.C, 1, f.B, f.L), u.x1t, f.A, lambda, nonneg, stats);
  next.B =
      solve_block(partitioned_khatri_rao(f.C, 1, next.A, f.L), u.x2t, f.B, lambda, nonneg, stats);
  next.C = solve_block(mode3_design(next.A, next.B, f.L, f.R), u.x3t, f.C, lambda, nonneg, stats);
  return next;
}

double objective(const Unfoldings& u, const BlockFactors& f) {
  return (u.x3t - mode3_design(f.A, f.B, f.L, f.R) * f.C.transpose()).squaredNorm();
}

double relative_residual(double objective, double tensor_norm) {
  const double r = std::sqrt(objective);
  return tensor_norm > 0.0 ? r / tensor_norm : r;
}

Matrix random_matrix(Index rows, Index cols, InitStrategy s, Rng& rng) {
  Matrix m(rows, cols);
  for (Index n = 0; n < m.size(); ++n) {
    m.data()[n] = s == InitStrategy::Gaussian ? rng.normal() : rng.uniform();
  }
  return m;
}

}  // namespace

double lambda_schedule(long n, const LambdaSchedule& s) {
  if (n < 0) throw std::invalid_argument("lambda_schedule: negative sweep index");
  return std::max(s.floor, s.lambda0 * std::pow(s.decay, static_cast<double>(n)));
}

void SolverConfig::validate() const {
  if (L < 1 || R < 1) throw std::invalid_argument("L and R must be >= 1");
  if (max_sweeps < 0) throw std::invalid_argument("max_sweeps must be >= 0");
  if (!(tol_rel_objective > 0.0) || !(tol_residual > 0.0)) {
    throw std::invalid_argument("tolerances must be positive");
  }
  if (stall_window < 1) throw std::invalid_argument("stall_window must be >= 1");
  if (regularization) {
    const auto& s = *regularization;
    if (!(s.floor >= 0.0) || !(s.lambda0 >= s.floor)) {
      throw std::invalid_argument("lambda schedule needs lambda0 >= floor >= 0");
    }
    if (!(s.decay > 0.0 && s.decay <= 1.0)) {
      throw std::invalid_argument("lambda decay must lie in (0, 1]");
    }
  }
  if (init == InitStrategy::Provided && !initial) {
    throw std::invalid_argument("init = provided but no initial factors given");
  }
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::ResidualReached: return "residual_reached";
    case StopReason::Stalled: return "stalled";
    case StopReason::MaxSweeps: return "max_sweeps";
  }
  return "unknown";
}

bool is_rank_degenerate(Dims dims, Index L, Index R) {
  return L * R > std::min(dims.I * dims.K, dims.J * dims.K);
}

BlockFactors init_factors(Dims dims, Index L, Index R, InitStrategy strategy, std::uint64_t seed,
                          const std::optional<BlockFactors>& provided) {
  if (strategy == InitStrategy::Provided) {
    if (!provided) throw std::invalid_argument("init_factors: no provided factors");
    provided->validate(dims);
    if (provided->L != L || provided->R != R) {
      throw ShapeError("init_factors: provided factors have a different (L, R)");
    }
    return *provided;
  }
  Rng rng(seed);
  Matrix a = random_matrix(dims.I, L * R, strategy, rng);
  Matrix b = random_matrix(dims.J, L * R, strategy, rng);
  Matrix c = random_matrix(dims.K, R, strategy, rng);
  return BlockFactors(std::move(a), std::move(b), std::move(c), L, R);
}

BlockFactors als_sweep(const Tensor3& t, const BlockFactors& f, bool nonneg) {
  return rals_sweep(t, f, 0.0, nonneg);
}

BlockFactors rals_sweep(const Tensor3& t, const BlockFactors& f, double lambda, bool nonneg) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("rals_sweep: lambda must be >= 0");
  f.validate(t.dims());
  SweepStats stats;
  return sweep(Unfoldings(t), f, lambda, nonneg, stats);
}

FitReport fit(const Tensor3& t, const SolverConfig& cfg) {
  cfg.validate();
  const Unfoldings u(t);

  FitReport rep;
  rep.tensor_norm = frobenius_norm(t);
  rep.factors = init_factors(t.dims(), cfg.L, cfg.R, cfg.init, cfg.seed, cfg.initial);
  if (is_rank_degenerate(t.dims(), cfg.L, cfg.R)) {
    rep.warnings.push_back("L*R exceeds min(I*K, J*K); factor designs are rank deficient");
  }

  auto record = [&](double obj, double lambda) {
    rep.objective_trace.push_back(obj);
    rep.relative_residual_trace.push_back(relative_residual(obj, rep.tensor_norm));
    rep.lambda_trace.push_back(lambda);
  };
  record(objective(u, rep.factors), 0.0);

  int quiet_sweeps = 0;
  SweepStats stats;
  rep.stop_reason = StopReason::MaxSweeps;
  if (rep.final_relative_residual() <= cfg.tol_residual) {
    rep.stop_reason = StopReason::ResidualReached;
  } else {
    for (long n = 0; n < cfg.max_sweeps; ++n) {
      const double lambda = cfg.regularization ? lambda_schedule(n, *cfg.regularization) : 0.0;
      BlockFactors next = sweep(u, rep.factors, lambda, cfg.nonnegative, stats);
      const double obj = objective(u, next);
      if (!std::isfinite(obj)) {
        rep.rank_deficient_solves = stats.rank_deficient;
        throw DivergenceError(std::move(rep));
      }
      const double prev = rep.final_objective();
      rep.factors = std::move(next);
      record(obj, lambda);
      rep.sweeps_used = n + 1;

      if (rep.final_relative_residual() <= cfg.tol_residual) {
        rep.stop_reason = StopReason::ResidualReached;
        break;
      }
      const double change = std::abs(prev - obj) / std::max(prev, std::numeric_limits<double>::min());
      quiet_sweeps = change <= cfg.tol_rel_objective ? quiet_sweeps + 1 : 0;
      if (quiet_sweeps >= cfg.stall_window) {
        rep.stop_reason = StopReason::Stalled;
        break;
      }
    }
  }
  rep.converged = rep.stop_reason == StopReason::ResidualReached;
  rep.rank_deficient_solves = stats.rank_deficient;
  rep.gradient_norm = objective_gradient(t, rep.factors).norm();
  return rep;
}

Vector objective_gradient(const Tensor3& t, const BlockFactors& f) {
  f.validate(t.dims());
  const Matrix m1 = partitioned_khatri_rao(f.C, 1, f.B, f.L);
  const Matrix m2 = partitioned_khatri_rao(f.C, 1, f.A, f.L);
  const Matrix m3 = mode3_design(f.A, f.B, f.L, f.R);
  const Matrix ga = -2.0 * (matricize(t, 1) - f.A * m1.transpose()) * m1;
  const Matrix gb = -2.0 * (matricize(t, 2) - f.B * m2.transpose()) * m2;
  const Matrix gc = -2.0 * (matricize(t, 3) - f.C * m3.transpose()) * m3;

  Vector g(ga.size() + gb.size() + gc.size());
  g << Eigen::Map<const Vector>(ga.data(), ga.size()), Eigen::Map<const Vector>(gb.data(), gb.size()),
      Eigen::Map<const Vector>(gc.data(), gc.size());
  return g;
}

Alignment align_factors(const Matrix& reference, const Matrix& estimate) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols()) {
    throw ShapeError("align_factors: reference and estimate shapes differ");
  }
  const Index R = reference.cols();
  for (Index r = 0; r < R; ++r) {
    if (reference.col(r).squaredNorm() == 0.0) {
      throw std::invalid_argument("align_factors: reference column " + std::to_string(r) +
                                  " is zero");
    }
  }

  // cost(r, s): squared residual of reference column r against the best
  // multiple of estimate column s.
  Matrix cost(R, R);
  Matrix scale(R, R);
  for (Index r = 0; r < R; ++r) {
    for (Index s = 0; s < R; ++s) {
      const double ee = estimate.col(s).squaredNorm();
      const double k = ee > 0.0 ? reference.col(r).dot(estimate.col(s)) / ee : 0.0;
      scale(r, s) = k;
      cost(r, s) = (reference.col(r) - k * estimate.col(s)).squaredNorm();
    }
  }

  std::vector<Index> perm(static_cast<std::size_t>(R));
  std::iota(perm.begin(), perm.end(), Index{0});
  if (R <= 8) {
    std::vector<Index> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (Index r = 0; r < R; ++r) c += cost(r, perm[r]);
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    perm = best;
  } else {
    Matrix corr(R, R);
    for (Index r = 0; r < R; ++r) {
      for (Index s = 0; s < R; ++s) {
        const double denom = reference.col(r).norm() * estimate.col(s).norm();
        corr(r, s) = denom > 0.0 ? std::abs(reference.col(r).dot(estimate.col(s))) / denom : 0.0;
      }
    }
    std::vector<bool> used_r(static_cast<std::size_t>(R), false);
    std::vector<bool> used_s(static_cast<std::size_t>(R), false);
    for (Index step = 0; step < R; ++step) {
      Index br = -1;
      Index bs = -1;
      double bv = -1.0;
      for (Index r = 0; r < R; ++r) {
        if (used_r[r]) continue;
        for (Index s = 0; s < R; ++s) {
          if (!used_s[s] && corr(r, s) > bv) {
            bv = corr(r, s);
            br = r;
            bs = s;
          }
        }
      }
      used_r[br] = true;
      used_s[bs] = true;
      perm[br] = bs;
    }
  }

  Alignment out;
  out.permutation = perm;
  double total = 0.0;
  for (Index r = 0; r < R; ++r) {
    out.scales.push_back(scale(r, perm[r]));
    total += cost(r, perm[r]);
  }
  out.error = std::sqrt(std::max(total, 0.0)) / reference.norm();
  return out;
}

void write_fit_report(std::ostream& os, const FitReport& report) {
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "L " << report.factors.L << '\n'
     << "R " << report.factors.R << '\n'
     << "dims " << report.factors.A.rows() << ' ' << report.factors.B.rows() << ' '
     << report.factors.C.rows() << '\n'
     << "sweeps_used " << report.sweeps_used << '\n'
     << "converged " << (report.converged ? "true" : "false") << '\n'
     << "stop_reason " << to_string(report.stop_reason) << '\n'
     << "tensor_norm " << report.tensor_norm << '\n'
     << "final_objective " << report.final_objective() << '\n'
     << "final_relative_residual " << report.final_relative_residual() << '\n'
     << "gradient_norm " << report.gradient_norm << '\n'
     << "rank_deficient_solves " << report.rank_deficient_solves << '\n';
  for (const auto& w : report.warnings) os << "warning " << w << '\n';
  os << "trace\n";
  os << "sweep lambda objective relative_residual\n";
  for (std::size_t n = 0; n < report.objective_trace.size(); ++n) {
    os << n << ' ' << report.lambda_trace[n] << ' ' << report.objective_trace[n] << ' '
       << report.relative_residual_trace[n] << '\n';
  }
  os.flags(flags);
  os.precision(precision);
}

}  // namespace btd
