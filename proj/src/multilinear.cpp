#include "btdkit/multilinear.hpp"

namespace btd {

BlockFactors::BlockFactors(Matrix a, Matrix b, Matrix c, Index l, Index r)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), L(l), R(r) {
  validate();
}

void BlockFactors::validate() const {
  if (L < 1 || R < 1) throw ShapeError("block width L and term count R must be >= 1");
  if (A.cols() != L * R || B.cols() != L * R || C.cols() != R) {
    throw ShapeError("factor column counts must be (L*R, L*R, R) = (" + std::to_string(L * R) +
                     "," + std::to_string(L * R) + "," + std::to_string(R) + "), got (" +
                     std::to_string(A.cols()) + "," + std::to_string(B.cols()) + "," +
                     std::to_string(C.cols()) + ")");
  }
  if (A.rows() < 1 || B.rows() < 1 || C.rows() < 1) throw ShapeError("empty factor matrix");
  require_finite(A, "A");
  require_finite(B, "B");
  require_finite(C, "C");
}

void BlockFactors::validate(Dims d) const {
  validate();
  if (dims() != d) {
    throw ShapeError("factors describe a " + to_string(dims()) + " tensor, expected " +
                     to_string(d));
  }
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("khatri_rao: column counts differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + ")");
  }
  return partitioned_khatri_rao(a, 1, b, 1);
}

Matrix partitioned_khatri_rao(const Matrix& x, Index p, const Matrix& y, Index q) {
  if (p < 1 || q < 1 || x.cols() % p != 0 || y.cols() % q != 0) {
    throw ShapeError("partitioned_khatri_rao: block width does not divide column count");
  }
  const Index R = x.cols() / p;
  if (y.cols() / q != R) {
    throw ShapeError("partitioned_khatri_rao: block counts differ (" + std::to_string(R) + " vs " +
                     std::to_string(y.cols() / q) + ")");
  }
  const Index ry = y.rows();
  Matrix out(x.rows() * ry, R * p * q);
  for (Index r = 0; r < R; ++r) {
    for (Index a = 0; a < p; ++a) {
      for (Index b = 0; b < q; ++b) {
        auto col = out.col(r * p * q + a * q + b);
        const auto ycol = y.col(r * q + b);
        for (Index i = 0; i < x.rows(); ++i) col.segment(i * ry, ry) = x(i, r * p + a) * ycol;
      }
    }
  }
  return out;
}

Matrix mode3_design(const Matrix& a, const Matrix& b, Index L, Index R) {
  if (L < 1 || R < 1 || a.cols() != L * R || b.cols() != L * R) {
    throw ShapeError("mode3_design: A and B need L*R columns");
  }
  const Index I = a.rows();
  const Index J = b.rows();
  Matrix out(I * J, R);
  for (Index r = 0; r < R; ++r) {
    Matrix e = a.middleCols(r * L, L) * b.middleCols(r * L, L).transpose();
    out.col(r) = Eigen::Map<const Vector>(e.data(), I * J);
  }
  return out;
}

Tensor3 reconstruct_btd(const BlockFactors& f, Dims dims) {
  f.validate(dims);
  const Matrix x3 = f.C * mode3_design(f.A, f.B, f.L, f.R).transpose();
  return dematricize(x3, 3, dims);
}

double btd_objective(const Tensor3& t, const BlockFactors& f) {
  f.validate(t.dims());
  const Matrix x3 = matricize(t, 3);
  return (x3 - f.C * mode3_design(f.A, f.B, f.L, f.R).transpose()).squaredNorm();
}

}  // namespace btd
