#pragma once

#include "btdkit/multilinear.hpp"
#include "btdkit/rng.hpp"

#include <cmath>

namespace btd::test {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index n = 0; n < m.size(); ++n) m.data()[n] = rng.normal();
  return m;
}

inline Tensor3 random_tensor(Dims d, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(d.size()));
  for (double& x : v) x = rng.normal();
  return Tensor3(d, std::move(v));
}

inline BlockFactors random_factors(Dims d, Index L, Index R, Rng& rng) {
  return BlockFactors(random_matrix(d.I, L * R, rng), random_matrix(d.J, L * R, rng),
                      random_matrix(d.K, R, rng), L, R);
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale > 0.0 ? (a - b).norm() / scale : 0.0;
}

inline Matrix as_matrix(const Tensor3& t) {
  return Eigen::Map<const Matrix>(t.data().data(), static_cast<Index>(t.size()), 1);
}

// x_ijk = sum_r sum_l a_il^(r) b_jl^(r) c_k^(r), straight from the definition.
inline Tensor3 reconstruct_loops(const BlockFactors& f) {
  const Dims d = f.dims();
  std::vector<double> v(static_cast<std::size_t>(d.size()), 0.0);
  for (Index k = 0; k < d.K; ++k)
    for (Index j = 0; j < d.J; ++j)
      for (Index i = 0; i < d.I; ++i) {
        double s = 0.0;
        for (Index r = 0; r < f.R; ++r) {
          double e = 0.0;
          for (Index l = 0; l < f.L; ++l) e += f.A(i, r * f.L + l) * f.B(j, r * f.L + l);
          s += e * f.C(k, r);
        }
        v[static_cast<std::size_t>(i + d.I * (j + d.J * k))] = s;
      }
  return Tensor3(d, std::move(v));
}

}  // namespace btd::test

namespace btd::test {

// Smallest 0.5||A x - b||^2 over x >= 0 for a single column b, found by trying
// every support set, solving the restricted least squares with a pivoted QR
// and keeping the best feasible candidate. Exponential in n; meant for n <= 6.
inline double nnls_enumerate(const Matrix& a, const Vector& b) {
  const Index n = a.cols();
  double best = 0.5 * b.squaredNorm();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Index> cols;
    for (Index c = 0; c < n; ++c)
      if (mask & (1u << c)) cols.push_back(c);
    Matrix sub(a.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Index>(c)) = a.col(cols[c]);
    const Vector xs = sub.colPivHouseholderQr().solve(b);
    if ((xs.array() < 0.0).any()) continue;
    best = std::min(best, 0.5 * (sub * xs - b).squaredNorm());
  }
  return best;
}

}  // namespace btd::test
