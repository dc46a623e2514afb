#include "btdkit/tensor.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace btd {

namespace {

void check_dims(const Dims& d) {
  if (d.I <= 0 || d.J <= 0 || d.K <= 0) {
    throw ShapeError("tensor dimensions must be positive, got " + to_string(d));
  }
}

void check_finite(std::span<const double> values) {
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (!std::isfinite(values[n])) {
      throw NonFiniteError(n, "non-finite value at linear offset " + std::to_string(n));
    }
  }
}

Index rows_for_mode(Dims d, int mode) {
  switch (mode) {
    case 1: return d.I;
    case 2: return d.J;
    case 3: return d.K;
  }
  throw std::invalid_argument("mode must be 1, 2 or 3, got " + std::to_string(mode));
}

constexpr int kDigits = std::numeric_limits<double>::max_digits10;

}  // namespace

std::string to_string(const Dims& d) {
  std::ostringstream os;
  os << '(' << d.I << ',' << d.J << ',' << d.K << ')';
  return os.str();
}

Tensor3::Tensor3(Dims dims) : dims_(dims) {
  check_dims(dims);
  data_.assign(static_cast<std::size_t>(dims.size()), 0.0);
}

Tensor3::Tensor3(Dims dims, std::vector<double> values) : dims_(dims), data_(std::move(values)) {
  check_dims(dims);
  if (data_.size() != static_cast<std::size_t>(dims.size())) {
    throw ShapeError("tensor " + to_string(dims) + " needs " + std::to_string(dims.size()) +
                     " values, got " + std::to_string(data_.size()));
  }
  check_finite(data_);
}

Tensor3 tensor_from_dense(Dims dims, std::span<const double> values) {
  return Tensor3(dims, std::vector<double>(values.begin(), values.end()));
}

Matrix matricize(const Tensor3& t, int mode) {
  const Dims d = t.dims();
  Matrix m(rows_for_mode(d, mode), d.size() / rows_for_mode(d, mode));
  for (Index k = 0; k < d.K; ++k) {
    for (Index j = 0; j < d.J; ++j) {
      for (Index i = 0; i < d.I; ++i) {
        const double v = t(i, j, k);
        switch (mode) {
          case 1: m(i, j + d.J * k) = v; break;
          case 2: m(j, i + d.I * k) = v; break;
          default: m(k, i + d.I * j) = v; break;
        }
      }
    }
  }
  return m;
}

Tensor3 dematricize(const Matrix& m, int mode, Dims dims) {
  check_dims(dims);
  const Index rows = rows_for_mode(dims, mode);
  if (m.rows() != rows || m.cols() != dims.size() / rows) {
    throw ShapeError("mode-" + std::to_string(mode) + " unfolding of " + to_string(dims) +
                     " must be " + std::to_string(rows) + "x" + std::to_string(dims.size() / rows));
  }
  std::vector<double> values(static_cast<std::size_t>(dims.size()));
  std::size_t n = 0;
  for (Index k = 0; k < dims.K; ++k) {
    for (Index j = 0; j < dims.J; ++j) {
      for (Index i = 0; i < dims.I; ++i) {
        switch (mode) {
          case 1: values[n++] = m(i, j + dims.J * k); break;
          case 2: values[n++] = m(j, i + dims.I * k); break;
          default: values[n++] = m(k, i + dims.I * j); break;
        }
      }
    }
  }
  return Tensor3(dims, std::move(values));
}

double frobenius_norm(const Tensor3& t) {
  const auto d = t.data();
  return Eigen::Map<const Vector>(d.data(), static_cast<Index>(d.size())).norm();
}

std::vector<double> vectorize(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

void require_finite(const Matrix& m, const std::string& name) {
  for (Index n = 0; n < m.size(); ++n) {
    if (!std::isfinite(m.data()[n])) {
      throw NonFiniteError(static_cast<std::size_t>(n),
                           name + ": non-finite entry at (" + std::to_string(n % m.rows()) + "," +
                               std::to_string(n / m.rows()) + ")");
    }
  }
}

void write_tensor(std::ostream& os, const Tensor3& t) {
  os << t.I() << ' ' << t.J() << ' ' << t.K() << '\n' << std::setprecision(kDigits);
  for (double v : t.data()) os << v << '\n';
}

Tensor3 read_tensor(std::istream& is) {
  Dims d;
  if (!(is >> d.I >> d.J >> d.K)) throw std::runtime_error("tensor file: bad header");
  check_dims(d);
  std::vector<double> values(static_cast<std::size_t>(d.size()));
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (!(is >> values[n])) {
      throw std::runtime_error("tensor file: expected " + std::to_string(values.size()) +
                               " values, read " + std::to_string(n));
    }
  }
  return Tensor3(d, std::move(values));
}

void save_tensor(const std::string& path, const Tensor3& t) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_tensor(os, t);
}

Tensor3 load_tensor(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_tensor(is);
}

void write_matrix(std::ostream& os, const Matrix& m) {
  os << m.rows() << ' ' << m.cols() << '\n' << std::setprecision(kDigits);
  for (Index n = 0; n < m.size(); ++n) os << m.data()[n] << '\n';
}

Matrix read_matrix(std::istream& is) {
  Index rows = 0;
  Index cols = 0;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) {
    throw std::runtime_error("matrix file: bad header");
  }
  Matrix m(rows, cols);
  for (Index n = 0; n < m.size(); ++n) {
    if (!(is >> m.data()[n])) throw std::runtime_error("matrix file: truncated");
  }
  require_finite(m, "matrix file");
  return m;
}

}  // namespace btd
