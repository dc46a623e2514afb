#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace btd {

/// Column-major dense matrix. Column-major storage is what vectorize() and
/// every matricization below rely on.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Dims {
  Index I = 0;
  Index J = 0;
  Index K = 0;

  Index size() const { return I * J * K; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::invalid_argument {
 public:
  NonFiniteError(std::size_t offset, const std::string& what)
      : std::invalid_argument(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Dense third-order tensor, first index fastest:
/// element (i, j, k) (0-based) lives at i + I*j + I*J*k.
///
/// Immutable after construction; every constructor rejects non-finite values.
class Tensor3 {
 public:
  Tensor3() = default;

  /// Zero tensor of the given dimensions.
  explicit Tensor3(Dims dims);

  /// Takes ownership of `values` laid out as above.
  Tensor3(Dims dims, std::vector<double> values);

  const Dims& dims() const { return dims_; }
  Index I() const { return dims_.I; }
  Index J() const { return dims_.J; }
  Index K() const { return dims_.K; }
  std::size_t size() const { return data_.size(); }

  double operator()(Index i, Index j, Index k) const {
    return data_[static_cast<std::size_t>(i + dims_.I * (j + dims_.J * k))];
  }

  std::span<const double> data() const { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  Dims dims_;
  std::vector<double> data_;
};

Tensor3 tensor_from_dense(Dims dims, std::span<const double> values);

/// Mode-n unfolding, n in {1, 2, 3}.
///   mode 1: I x JK, column j + J*k
///   mode 2: J x IK, column i + I*k
///   mode 3: K x IJ, column i + I*j
Matrix matricize(const Tensor3& t, int mode);

/// Inverse of matricize().
Tensor3 dematricize(const Matrix& m, int mode, Dims dims);

double frobenius_norm(const Tensor3& t);

/// Stacks columns.
std::vector<double> vectorize(const Matrix& m);

/// Throws NonFiniteError naming the first offending element.
void require_finite(const Matrix& m, const std::string& name);

// Text format: header "I J K", then I*J*K values in layout order.
void write_tensor(std::ostream& os, const Tensor3& t);
Tensor3 read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor3& t);
Tensor3 load_tensor(const std::string& path);

// Same idea for matrices: header "rows cols", values column-major.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

}  // namespace btd
