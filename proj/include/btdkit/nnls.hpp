#pragma once

#include "btdkit/tensor.hpp"

#include <stdexcept>

namespace btd {

/// min ||design * X - rhs||_F, one independent problem per column of rhs.
struct LsProblem {
  Matrix design;  // m x n
  Matrix rhs;     // m x t

  void validate() const;
};

struct LsSolution {
  Matrix x;  // n x t
  Index rank = 0;
  bool rank_deficient = false;
};

/// Least squares through a complete orthogonal decomposition, so rank-deficient
/// designs give the minimum-norm solution instead of failing.
LsSolution solve_ls(const LsProblem& p);

/// Thrown when Lawson-Hanson exceeds 3n outer iterations on some column.
class NnlsIterationLimit : public std::runtime_error {
 public:
  NnlsIterationLimit(Matrix best, Index column)
      : std::runtime_error("nnls: active-set iteration cap exceeded on column " +
                           std::to_string(column)),
        best_(std::move(best)),
        column_(column) {}

  /// Feasible (>= 0) iterate, optimal on every column except the failing one.
  const Matrix& best() const { return best_; }
  Index column() const { return column_; }

 private:
  Matrix best_;
  Index column_;
};

/// Lawson-Hanson active-set NNLS, column by column.
Matrix solve_nnls(const LsProblem& p);

/// KKT tolerance used for column j: 1e-8 * ||design||_F * ||rhs_j||.
double kkt_tolerance(const LsProblem& p, Index column);

/// Largest KKT violation of x for min 1/2||design x - rhs||^2 s.t. x >= 0, over all
/// columns and coordinates. Zero coordinates may have gradient >= 0, positive
/// ones need a zero gradient, and negative entries count as violations.
double kkt_residual(const LsProblem& p, const Matrix& x);

}  // namespace btd
