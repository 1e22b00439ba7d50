#pragma once

// Time evolution under a linearized generator, qubit and Choi closed forms,
// harmonic-oscillator second moments and steady states.

#include "psa/core.hpp"
#include "psa/generator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace psa {

struct Trajectory {
  std::vector<double> times;
  std::vector<Matrix> states;
  std::map<std::string, std::vector<double>> observables;
};

namespace detail {

inline void check_time_grid(const std::vector<double>& times) {
  if (times.empty()) throw ValidationError("time grid is empty");
  if (!(times.front() >= 0.0)) throw ValidationError("time grid must start at t >= 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw ValidationError("time grid must be strictly increasing");
}

/// Index sets of the connected components of the nonzero pattern of a square
/// matrix. exp(m) is block diagonal on the same sets.
inline std::vector<std::vector<Eigen::Index>> coupled_blocks(const Matrix& m) {
  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> parent(n);
  for (Eigen::Index i = 0; i < n; ++i) parent[i] = i;
  auto root = [&](Eigen::Index i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j && m(i, j) != Complex(0.0)) parent[root(i)] = root(j);
  std::vector<std::vector<Eigen::Index>> blocks;
  std::vector<Eigen::Index> slot(n, -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = root(i);
    if (slot[r] < 0) {
      slot[r] = Eigen::Index(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[r]].push_back(i);
  }
  return blocks;
}

/// Walks a time grid, handing out exp(L h) for each increment h. Equal
/// increments reuse the previous exponential; decoupled blocks of L are
/// exponentiated separately.
class StepExponentials {
 public:
  explicit StepExponentials(const Matrix& generator)
      : blocks_(coupled_blocks(generator)) {
    for (const auto& b : blocks_) {
      const auto k = Eigen::Index(b.size());
      Matrix sub(k, k);
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = generator(b[i], b[j]);
      sub_generators_.push_back(std::move(sub));
    }
    dim_ = generator.rows();
  }

  /// exp(L h) v
  Vector apply(double h, const Vector& v) {
    update(h);
    Vector out(v.size());
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const auto& b = blocks_[k];
      Vector part(Eigen::Index(b.size()));
      for (std::size_t i = 0; i < b.size(); ++i) part(Eigen::Index(i)) = v(b[i]);
      part = exponentials_[k] * part;
      for (std::size_t i = 0; i < b.size(); ++i) out(b[i]) = part(Eigen::Index(i));
    }
    return out;
  }

  /// exp(L h) as a dense matrix.
  Matrix full(double h) {
    update(h);
    Matrix out = Matrix::Zero(dim_, dim_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const auto& b = blocks_[k];
      for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
          out(b[i], b[j]) = exponentials_[k](Eigen::Index(i), Eigen::Index(j));
    }
    return out;
  }

  std::size_t block_count() const { return blocks_.size(); }

 private:
  void update(double h) {
    if (cached_h_ >= 0.0 && std::abs(h - cached_h_) <= 1e-12 * std::max(h, 1e-300)) return;
    exponentials_.clear();
    for (const auto& g : sub_generators_) exponentials_.push_back((g * Complex(h)).exp());
    cached_h_ = h;
  }

  std::vector<std::vector<Eigen::Index>> blocks_;
  std::vector<Matrix> sub_generators_;
  std::vector<Matrix> exponentials_;
  Eigen::Index dim_ = 0;
  double cached_h_ = -1.0;
};

inline void check_finite(const Matrix& m, double t) {
  if (!m.allFinite()) throw IntegrationError("non-finite state during integration", t);
}

}  // namespace detail

/// Apply exp(L t_k) to an arbitrary (not necessarily Hermitian) initial matrix.
inline std::vector<Matrix> propagate(const Liouvillian& l, const Matrix& x0,
                                     const std::vector<double>& times) {
  detail::check_time_grid(times);
  const auto d = l.dimension();
  if (x0.rows() != d || x0.cols() != d) throw ValidationError("initial matrix has the wrong dimension");
  detail::StepExponentials steps(l.matrix);
  std::vector<Matrix> out;
  out.reserve(times.size());
  Vector v = vec(x0);
  double t_prev = 0.0;
  for (double t : times) {
    if (t > t_prev) v = steps.apply(t - t_prev, v);
    Matrix x = unvec(v, d);
    detail::check_finite(x, t);
    out.push_back(std::move(x));
    t_prev = t;
  }
  return out;
}

inline void validate_density_matrix(const Matrix& rho, double tol = 1e-10) {
  if (rho.rows() != rho.cols()) throw ValidationError("density matrix must be square");
  if (max_abs_entry(rho - rho.adjoint()) > tol) throw ValidationError("density matrix is not Hermitian");
  if (std::abs(rho.trace() - Complex(1.0)) > tol) throw ValidationError("density matrix trace is not 1");
  if (min_eigenvalue(hermitian_part(rho)) < -tol)
    throw ValidationError("density matrix is not positive semi-definite");
}

/// rho(t_k) = exp(L t_k) rho0 via matrix exponentials of the step increments.
inline Trajectory evolve(const Liouvillian& l, const Matrix& rho0, const std::vector<double>& times) {
  validate_density_matrix(rho0);
  Trajectory tr;
  tr.times = times;
  tr.states = propagate(l, rho0, times);
  return tr;
}

/// Adds rho00, rho11, re_rho10, im_rho10 and det series for a qubit trajectory.
inline void add_qubit_observables(Trajectory& tr) {
  auto& o = tr.observables;
  for (const auto& rho : tr.states) {
    if (rho.rows() != 2) throw ValidationError("qubit observables need a 2x2 trajectory");
    o["rho00"].push_back(rho(0, 0).real());
    o["rho11"].push_back(rho(1, 1).real());
    o["re_rho10"].push_back(rho(1, 0).real());
    o["im_rho10"].push_back(rho(1, 0).imag());
    o["det"].push_back(rho.determinant().real());
  }
}

// ---------------------------------------------------------------------------
// qubit closed forms

/// Parameters of the qubit generator. Basis: index 0 = |0> (ground),
/// index 1 = |1>, sigma_- = |0><1|.
struct QubitParams {
  double omega_bar = 1.0;  // omega0 + eta_++ - eta_--
  double gamma_mm = 0.0;
  double gamma_pp = 0.0;
  Complex gamma_mp{0.0, 0.0};  // gamma_{-+}^(dt)

  double s() const { return gamma_pp + gamma_mm; }
  double d() const { return gamma_pp - gamma_mm; }
  /// omega_bar_dt^2 = omega_bar^2 - |gamma_-+|^2 (may be negative).
  double omega_dt_squared() const { return omega_bar * omega_bar - std::norm(gamma_mp); }
};

namespace detail {

/// cos(w t) and sin(w t) / w for w^2 of either sign (hyperbolic continuation for w^2 < 0).
struct Oscillation {
  double cosine;
  double sine_over_w;
};

inline Oscillation oscillation(double w2, double t) {
  if (w2 > 0.0) {
    const double w = std::sqrt(w2);
    return {std::cos(w * t), std::sin(w * t) / w};
  }
  if (w2 < 0.0) {
    const double y = std::sqrt(-w2);
    return {std::cosh(y * t), std::sinh(y * t) / y};
  }
  return {1.0, t};
}

}  // namespace detail

/// Closed-form rho(t) for rho(0) = |+><+|.
inline Matrix qubit_analytic(const QubitParams& p, double t) {
  const double s = p.s();
  const auto osc = detail::oscillation(p.omega_dt_squared(), t);
  const double damp = std::exp(-0.5 * s * t);
  const double re10 = 0.5 * damp * (p.gamma_mp.real() * osc.sine_over_w + osc.cosine);
  const double im10 = -0.5 * damp * (p.gamma_mp.imag() + p.omega_bar) * osc.sine_over_w;
  const double rho00 = s == 0.0 ? 0.5 : (-p.d() * std::exp(-s * t) + 2.0 * p.gamma_pp) / (2.0 * s);
  Matrix rho(2, 2);
  rho << rho00, Complex(re10, -im10), Complex(re10, im10), 1.0 - rho00;
  return rho;
}

/// Closed-form Choi eigenvalue lambda^(dt)(t), written with sin(w t)/w so it
/// stays real when omega_bar_dt is imaginary.
inline double choi_eigenvalue_analytic(const QubitParams& p, double t) {
  const double s = p.s();
  if (s == 0.0) return 0.0;
  const double d = p.d();
  const auto osc = detail::oscillation(p.omega_dt_squared(), t);
  const double g2 = std::norm(p.gamma_mp);
  const double inner =
      d * d * (std::cosh(s * t) - 1.0) + 2.0 * g2 * s * s * osc.sine_over_w * osc.sine_over_w;
  return 0.25 * (1.0 - std::exp(-s * t) -
                 std::sqrt(2.0) / s * std::exp(-0.5 * s * t) * std::sqrt(std::max(0.0, inner)));
}

/// lambda^(dt)'(0) = (s - sqrt(d^2 + 4 |gamma_-+|^2)) / 4.
inline double choi_eigenvalue_slope_at_zero(const QubitParams& p) {
  const double d = p.d();
  return 0.25 * (p.s() - std::sqrt(d * d + 4.0 * std::norm(p.gamma_mp)));
}

// ---------------------------------------------------------------------------
// Choi-Jamiolkowski states

struct ChoiTrajectory {
  std::vector<double> times;
  std::vector<Matrix> choi_states;
  std::vector<RealVector> eigenvalues;  // ascending
};

/// Choi matrix of a propagator P = exp(L t): blocks (i, j) = Phi(|i><j|) / d.
inline Matrix choi_matrix(const Matrix& propagator, Eigen::Index d) {
  Matrix c = Matrix::Zero(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      c.block(i * d, j * d, d, d) = unvec(propagator.col(i + d * j), d) / double(d);
  return c;
}

inline ChoiTrajectory choi_evolution(const Liouvillian& l, const std::vector<double>& times) {
  detail::check_time_grid(times);
  const auto d = l.dimension();
  detail::StepExponentials steps(l.matrix);
  ChoiTrajectory out;
  out.times = times;
  Matrix prop = Matrix::Identity(d * d, d * d);
  double t_prev = 0.0;
  for (double t : times) {
    if (t > t_prev) prop = steps.full(t - t_prev) * prop;
    detail::check_finite(prop, t);
    Matrix c = choi_matrix(prop, d);
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(c), Eigen::EigenvaluesOnly);
    out.eigenvalues.push_back(es.eigenvalues());
    out.choi_states.push_back(std::move(c));
    t_prev = t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// oscillator second moments

/// Coefficients of the closed <a^2>, <a^dag a> system; eta_{-+} = conj(eta_pm),
/// gamma_{-+} = conj(gamma_pm).
struct QhoParams {
  double omega_bar = 1.0;  // omega0 + eta_-- + eta_++
  Complex eta_pm{0.0, 0.0};    // eta_{+-}^(dt)
  double gamma_mm = 0.0;
  double gamma_pp = 0.0;
  Complex gamma_pm{0.0, 0.0};  // gamma_{+-}^(dt)
};

struct QhoMoments {
  std::vector<double> times;
  std::vector<Complex> a2;      // <a^2>
  std::vector<double> number;   // <a^dag a>
};

namespace detail {

/// d/dt (Re<a^2>, Im<a^2>, <a^dag a>, 1) as a 4x4 real matrix.
inline Eigen::Matrix4d qho_moment_matrix(const QhoParams& p) {
  const double w = p.omega_bar;
  const double er = p.eta_pm.real(), ei = p.eta_pm.imag();
  const double gr = p.gamma_pm.real(), gi = p.gamma_pm.imag();
  const double D = p.gamma_pp - p.gamma_mm;
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  // d<a^2>/dt = -2i (w <a^2> + 2 eta <N> + eta) - gamma_{+-} - D <a^2>
  a.row(0) << -D, 2.0 * w, 4.0 * ei, 2.0 * ei - gr;
  a.row(1) << -2.0 * w, -D, -4.0 * er, -2.0 * er - gi;
  // d<N>/dt = 2i (eta_{-+} <a^2> - eta_{+-} <a^2>^*) - D <N> + gamma_--
  a.row(2) << 4.0 * ei, -4.0 * er, -D, p.gamma_mm;
  return a;
}

}  // namespace detail

/// Exact solution of the linear moment system on a time grid.
inline QhoMoments qho_moments(const QhoParams& p, Complex a2_0, double number_0,
                              const std::vector<double>& times) {
  detail::check_time_grid(times);
  if (number_0 < 0.0) throw ValidationError("initial <a^dag a> must be >= 0");
  const Eigen::Matrix4d a = detail::qho_moment_matrix(p);
  QhoMoments out;
  out.times = times;
  Eigen::Vector4d z(a2_0.real(), a2_0.imag(), number_0, 1.0);
  double t_prev = 0.0, h_cached = -1.0;
  Eigen::Matrix4d step;
  for (double t : times) {
    const double h = t - t_prev;
    if (h > 0.0) {
      if (std::abs(h - h_cached) > 1e-12 * h) {
        step = (a * h).exp();
        h_cached = h;
      }
      z = step * z;
    }
    out.a2.emplace_back(z(0), z(1));
    out.number.push_back(z(2));
    t_prev = t;
  }
  return out;
}

/// Stationary point of the moment system.
inline std::pair<Complex, double> qho_moments_steady(const QhoParams& p) {
  const Eigen::Matrix4d a = detail::qho_moment_matrix(p);
  const Eigen::Vector3d z = a.topLeftCorner<3, 3>().fullPivLu().solve(-a.topRightCorner<3, 1>());
  return {Complex(z(0), z(1)), z(2)};
}

/// Largest population of the top ladder level along a trajectory.
inline double tail_population(const std::vector<Matrix>& states) {
  double m = 0.0;
  for (const auto& rho : states) m = std::max(m, rho(rho.rows() - 1, rho.cols() - 1).real());
  return m;
}

/// Truncated-ladder results are trusted while the tail stays below this.
inline constexpr double kTailTolerance = 1e-10;

// ---------------------------------------------------------------------------
// steady state

/// Kernel vector of the generator, reshaped, Hermitized and trace-normalized.
/// A kernel of dimension != 1 (singular values below 1e-9 * sigma_max) is an error.
inline Matrix steady_state(const Liouvillian& l) {
  const auto d = l.dimension();
  Eigen::BDCSVD<Matrix> svd(l.matrix, Eigen::ComputeFullV);
  const RealVector& sv = svd.singularValues();
  const double tol = 1e-9 * std::max(sv(0), 1.0);
  int kernel = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) <= tol) ++kernel;
  if (kernel != 1)
    throw NonUniqueSteadyStateError(
        "generator kernel has dimension " + std::to_string(kernel) + " (expected 1)", kernel);
  Matrix rho = unvec(svd.matrixV().col(sv.size() - 1), d);
  rho = hermitian_part(rho / rho.trace());
  return rho / rho.trace().real();
}

}  // namespace psa
