#include "btdkit/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace btd {

namespace {

// Stopping threshold on the dual vector; a hundredth of the KKT certificate
// tolerance so the certificate holds with room for rounding.
constexpr double kDualTol = 1e-10;

using Cod = Eigen::CompleteOrthogonalDecomposition<Matrix>;

// One Lawson-Hanson solve. Returns false if the iteration cap was hit; x then
// holds the last feasible iterate.
bool nnls_column(const Matrix& a, const Vector& b, double a_norm, Vector& x) {
  const Index n = a.cols();
  x.setZero(n);
  const double tol = kDualTol * a_norm * b.norm();

  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  std::vector<bool> excluded(static_cast<std::size_t>(n), false);
  std::vector<Index> cols;
  Vector w = a.transpose() * b;
  Vector z(n);
  const Index cap = 3 * n;
  Index iterations = 0;

  while (true) {
    Index t = -1;
    double best = tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[j] && !excluded[j] && w(j) > best) {
        best = w(j);
        t = j;
      }
    }
    if (t < 0) return true;
    if (++iterations > cap) return false;
    passive[t] = true;

    bool first_inner = true;
    while (true) {
      cols.clear();
      for (Index j = 0; j < n; ++j) {
        if (passive[j]) cols.push_back(j);
      }
      Matrix sub(a.rows(), static_cast<Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Index>(c)) = a.col(cols[c]);
      const Vector zp = Cod(sub).solve(b);
      z.setZero();
      for (std::size_t c = 0; c < cols.size(); ++c) z(cols[c]) = zp(static_cast<Index>(c));

      // Rounding can make the entering variable come back non-positive; drop it
      // and try the next candidate rather than cycling.
      if (first_inner && z(t) <= 0.0) {
        passive[t] = false;
        excluded[t] = true;
        break;
      }
      first_inner = false;

      bool feasible = true;
      for (Index j : cols) {
        if (z(j) <= 0.0) {
          feasible = false;
          break;
        }
      }
      if (feasible) {
        x = z;
        std::fill(excluded.begin(), excluded.end(), false);
        break;
      }

      double alpha = std::numeric_limits<double>::infinity();
      Index blocking = -1;
      for (Index j : cols) {
        if (z(j) <= 0.0) {
          const double step = x(j) / (x(j) - z(j));
          if (step < alpha) {
            alpha = step;
            blocking = j;
          }
        }
      }
      x += alpha * (z - x);
      x(blocking) = 0.0;
      for (Index j : cols) {
        if (x(j) <= 0.0) {
          x(j) = 0.0;
          passive[j] = false;
        }
      }
      std::fill(excluded.begin(), excluded.end(), false);
      if (std::none_of(passive.begin(), passive.end(), [](bool v) { return v; })) break;
    }
    w = a.transpose() * (b - a * x);
  }
}

}  // namespace

void LsProblem::validate() const {
  if (design.rows() < 1 || design.cols() < 1 || rhs.cols() < 1) {
    throw ShapeError("least-squares problem needs a non-empty design and at least one rhs");
  }
  if (rhs.rows() != design.rows()) {
    throw ShapeError("design has " + std::to_string(design.rows()) + " rows, rhs has " +
                     std::to_string(rhs.rows()));
  }
  require_finite(design, "design");
  require_finite(rhs, "rhs");
}

LsSolution solve_ls(const LsProblem& p) {
  p.validate();
  const Cod cod(p.design);
  LsSolution out;
  out.x = cod.solve(p.rhs);
  out.rank = cod.rank();
  out.rank_deficient = out.rank < p.design.cols();
  return out;
}

Matrix solve_nnls(const LsProblem& p) {
  p.validate();
  const double a_norm = p.design.norm();

  // Columns whose unconstrained optimum is already feasible need no active set.
  const Matrix unconstrained = Cod(p.design).solve(p.rhs);
  Matrix x(p.design.cols(), p.rhs.cols());
  Vector col;
  Index failed = -1;
  for (Index j = 0; j < p.rhs.cols(); ++j) {
    if ((unconstrained.col(j).array() >= 0.0).all()) {
      x.col(j) = unconstrained.col(j);
      continue;
    }
    if (!nnls_column(p.design, p.rhs.col(j), a_norm, col) && failed < 0) failed = j;
    x.col(j) = col;
  }
  if (failed >= 0) throw NnlsIterationLimit(std::move(x), failed);
  return x;
}

double kkt_tolerance(const LsProblem& p, Index column) {
  return 1e-8 * p.design.norm() * p.rhs.col(column).norm();
}

double kkt_residual(const LsProblem& p, const Matrix& x) {
  p.validate();
  if (x.rows() != p.design.cols() || x.cols() != p.rhs.cols()) {
    throw ShapeError("kkt_residual: solution shape does not conform");
  }
  const Matrix grad = p.design.transpose() * (p.design * x - p.rhs);
  double worst = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      double violation = 0.0;
      if (v < 0.0) {
        violation = std::numeric_limits<double>::infinity();
      } else if (v == 0.0) {
        violation = std::max(0.0, -grad(i, j));
      } else {
        violation = std::abs(grad(i, j));
      }
      worst = std::max(worst, violation);
    }
  }
  return worst;
}

}  // namespace btd
