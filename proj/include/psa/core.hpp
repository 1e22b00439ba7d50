#pragma once

// Shared numeric types, error hierarchy and small dense linear-algebra helpers.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace psa {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr Complex kI{0.0, 1.0};

// ---------------------------------------------------------------------------
// errors

/// Invalid user input: non-Hermitian matrices, bad grids, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent pipeline wiring, e.g. a gap without an Omega entry.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for every failure of a numerical method on valid input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  QuadratureError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class NotCompletelyPositiveError : public NumericalError {
 public:
  NotCompletelyPositiveError(const std::string& what, double lambda_min)
      : NumericalError(what), lambda_min_(lambda_min) {}
  double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double time)
      : NumericalError(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class NonUniqueSteadyStateError : public NumericalError {
 public:
  NonUniqueSteadyStateError(const std::string& what, int kernel_dimension)
      : NumericalError(what), kernel_dimension_(kernel_dimension) {}
  int kernel_dimension() const noexcept { return kernel_dimension_; }

 private:
  int kernel_dimension_;
};

// ---------------------------------------------------------------------------
// dense helpers

inline double max_abs_entry(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Hermiticity test relative to the largest entry: |M - M^dag| <= tol * max|M_ij|.
inline bool is_hermitian(const Matrix& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = max_abs_entry(m);
  return max_abs_entry(m - m.adjoint()) <= rel_tol * scale;
}

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

inline Matrix anticommutator(const Matrix& a, const Matrix& b) { return a * b + b * a; }

/// Largest singular value.
inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() <= 16 && m.cols() <= 16) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

/// Smallest eigenvalue of a Hermitian matrix (only the lower triangle is read).
inline double min_eigenvalue(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// ---------------------------------------------------------------------------
// linearization
//
// Density matrices are stacked column by column (column-major, Eigen's native
// storage): vec(X)[i + d*j] = X(i, j). With this convention
//   vec(A X B) = (B^T kron A) vec(X).

inline Vector vec(const Matrix& x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index dim) {
  if (v.size() != dim * dim) throw ValidationError("unvec: size is not dim^2");
  return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

/// Superoperator X -> A X B.
inline Matrix sandwich_superop(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(b.transpose(), a).eval();
}

/// Superoperator X -> A X.
inline Matrix left_superop(const Matrix& a) {
  return Eigen::kroneckerProduct(Matrix::Identity(a.rows(), a.cols()), a).eval();
}

/// Superoperator X -> X B.
inline Matrix right_superop(const Matrix& b) {
  return Eigen::kroneckerProduct(b.transpose(), Matrix::Identity(b.rows(), b.cols())).eval();
}

/// Superoperator X -> -i [H, X].
inline Matrix hamiltonian_superop(const Matrix& h) {
  return -kI * (left_superop(h) - right_superop(h));
}

}  // namespace psa
