#pragma once

#include "btdkit/tensor.hpp"

namespace btd {

/// Factor matrices of a rank-(L,L,1) block term decomposition.
///
/// Column block r of A (I x L) and of B (J x L) together with column r of C
/// form the term (A_r * B_r^T) o c_r.
struct BlockFactors {
  Matrix A;  // I x L*R
  Matrix B;  // J x L*R
  Matrix C;  // K x R
  Index L = 1;
  Index R = 1;

  BlockFactors() = default;
  BlockFactors(Matrix a, Matrix b, Matrix c, Index l, Index r);

  auto A_block(Index r) const { return A.middleCols(r * L, L); }
  auto B_block(Index r) const { return B.middleCols(r * L, L); }

  Dims dims() const { return {A.rows(), B.rows(), C.rows()}; }

  /// Throws ShapeError / NonFiniteError when the invariants do not hold.
  void validate() const;
  void validate(Dims d) const;
};

Matrix kronecker(const Matrix& a, const Matrix& b);

/// Columnwise Kronecker product; both operands need the same column count.
Matrix khatri_rao(const Matrix& a, const Matrix& b);

/// [X_1 (x) Y_1, ..., X_R (x) Y_R] for X split into blocks of width p and Y into
/// blocks of width q.
Matrix partitioned_khatri_rao(const Matrix& x, Index p, const Matrix& y, Index q);

/// IJ x R matrix whose column r is vec(A_r * B_r^T) = (B_r kr A_r) * 1_L.
Matrix mode3_design(const Matrix& a, const Matrix& b, Index L, Index R);

Tensor3 reconstruct_btd(const BlockFactors& f, Dims dims);

/// ||T - reconstruct_btd(f)||_F^2
double btd_objective(const Tensor3& t, const BlockFactors& f);

}  // namespace btd
