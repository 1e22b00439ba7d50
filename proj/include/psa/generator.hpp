#pragma once

// Coarse-grained (partial secular) generator: gamma^(dt), eta^(dt), the Lamb
// shift, the linearized Liouvillian, its diagonal GKSL form and commutator audits.

#include "psa/bath.hpp"
#include "psa/core.hpp"
#include "psa/spectral.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace psa {

// ---------------------------------------------------------------------------
// coarse graining

inline bool same_gap(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// sinc((omega - omega') dt / 2); 1 on the diagonal or at dt = 0, Kronecker delta at dt = inf.
inline double sinc_factor(double omega, double omega_prime, double delta_t) {
  if (std::isnan(delta_t) || delta_t < 0.0) throw ValidationError("delta_t must be >= 0 or +inf");
  if (same_gap(omega, omega_prime) || delta_t == 0.0) return 1.0;
  if (std::isinf(delta_t)) return 0.0;
  const double x = 0.5 * (omega - omega_prime) * delta_t;
  return x == 0.0 ? 1.0 : std::sin(x) / x;
}

/// Coarse-graining time on the extended half-line, or a sinc value injected
/// directly for models with a single off-diagonal gap difference.
class CoarseGraining {
 public:
  static CoarseGraining secular() { return CoarseGraining(kInf, std::nullopt); }
  static CoarseGraining redfield() { return CoarseGraining(0.0, std::nullopt); }
  static CoarseGraining time(double delta_t) {
    if (std::isnan(delta_t) || delta_t < 0.0) throw ValidationError("delta_t must be >= 0 or +inf");
    return CoarseGraining(delta_t, std::nullopt);
  }
  static CoarseGraining uniform_sinc(double value) {
    if (!(value >= -1.0 && value <= 1.0)) throw ValidationError("sinc value must lie in [-1, 1]");
    return CoarseGraining(std::nullopt, value);
  }

  double factor(double omega, double omega_prime) const {
    if (same_gap(omega, omega_prime)) return 1.0;
    if (sinc_) return *sinc_;
    return sinc_factor(omega, omega_prime, *delta_t_);
  }

  std::optional<double> delta_t() const { return delta_t_; }
  std::optional<double> injected_sinc() const { return sinc_; }
  bool is_secular() const { return delta_t_ && std::isinf(*delta_t_); }

  std::string describe() const {
    std::ostringstream os;
    os.precision(12);
    if (sinc_) os << "sinc=" << *sinc_;
    else if (std::isinf(*delta_t_)) os << "delta_t=inf";
    else os << "delta_t=" << *delta_t_;
    return os.str();
  }

 private:
  CoarseGraining(std::optional<double> dt, std::optional<double> s) : delta_t_(dt), sinc_(s) {}
  std::optional<double> delta_t_;
  std::optional<double> sinc_;
};

/// Smallest dt >= 0 with sinc(gap_difference * dt / 2) = value, value in [0, 1]
/// (principal branch x in [0, pi]).
inline double time_for_sinc(double value, double gap_difference) {
  if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("sinc inversion needs a value in [0, 1]");
  if (!(std::abs(gap_difference) > 0.0)) throw ValidationError("gap difference must be nonzero");
  const double scale = 2.0 / std::abs(gap_difference);
  if (value == 1.0) return 0.0;
  if (value == 0.0) return kPi * scale;
  auto f = [value](double x) { return std::sin(x) / x - value; };
  std::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(
      f, 1e-300, kPi, f(1e-300), f(kPi), boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (lo + hi) * scale;
}

// ---------------------------------------------------------------------------
// rate matrices

/// Collective index i = (alpha, omega).
struct ChannelGap {
  std::size_t channel;
  double gap;
};

struct RateMatrices {
  Matrix gamma;  // gamma_ij = (Omega_ab(w') + conj Omega_ba(w)) S_{w-w'}
  Matrix eta;    // eta_ij   = (Omega_ab(w') - conj Omega_ba(w)) / (2i) S_{w-w'}
};

inline RateMatrices rate_matrices(const std::vector<ChannelGap>& index, const OmegaProvider& omega,
                                  const CoarseGraining& cg) {
  const auto n = static_cast<Eigen::Index>(index.size());
  RateMatrices r{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [alpha, w] = index[i];
    const Matrix& om_w = omega.at(w);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& [beta, wp] = index[j];
      const double s = cg.factor(w, wp);
      if (s == 0.0) continue;
      const Matrix& om_wp = omega.at(wp);
      if (static_cast<Eigen::Index>(std::max(alpha, beta)) >= om_w.rows())
        throw ConfigurationError("Omega matrices have fewer channels than the coupling index");
      const Complex a = om_wp(alpha, beta);
      const Complex b = std::conj(om_w(beta, alpha));
      r.gamma(i, j) = (a + b) * s;
      r.eta(i, j) = (a - b) / (2.0 * kI) * s;
    }
  }
  return r;
}

/// Every (alpha, omega) pair of a provider, gap-major.
inline std::vector<ChannelGap> full_index(const OmegaProvider& omega) {
  std::vector<ChannelGap> idx;
  for (double w : omega.gaps())
    for (Eigen::Index a = 0; a < omega.channels(); ++a) idx.push_back({std::size_t(a), w});
  return idx;
}

/// gamma^(dt) over all (alpha, omega) pairs of a provider.
inline Matrix coarse_grained_gamma(const OmegaProvider& omega, const CoarseGraining& cg) {
  return rate_matrices(full_index(omega), omega, cg).gamma;
}

// ---------------------------------------------------------------------------
// generator

struct CoarseGrainedGenerator {
  CoarseGraining coarse_graining = CoarseGraining::secular();
  std::vector<ChannelGap> index_map;
  std::vector<Matrix> ops;  // A_i, aligned with index_map
  Matrix gamma;
  Matrix eta;
  Matrix lamb_shift;  // H_LS = sum_ij eta_ij A_i A_j^dag

  Eigen::Index dimension() const { return lamb_shift.rows(); }
};

inline void check_uniform_sinc_applicable(const std::vector<double>& gaps) {
  std::vector<double> diffs;
  for (double a : gaps)
    for (double b : gaps)
      if (a < b) {
        const double d = b - a;
        bool seen = false;
        for (double x : diffs) seen = seen || same_gap(x, d);
        if (!seen) diffs.push_back(d);
      }
  if (diffs.size() > 1)
    throw ConfigurationError("an injected sinc value needs a single off-diagonal gap difference");
}

inline CoarseGrainedGenerator build_generator(const GapDecomposition& gaps,
                                              const OmegaProvider& omega,
                                              const CoarseGraining& cg) {
  if (gaps.eigenops.empty()) throw ConfigurationError("gap decomposition has no eigenoperators");
  for (double w : gaps.gaps) (void)omega.at(w);
  if (cg.injected_sinc()) check_uniform_sinc_applicable(gaps.gaps);

  CoarseGrainedGenerator g;
  g.coarse_graining = cg;
  for (const auto& e : gaps.eigenops) {
    g.index_map.push_back({e.channel, e.gap});
    g.ops.push_back(e.op);
  }
  auto rates = rate_matrices(g.index_map, omega, cg);
  g.gamma = std::move(rates.gamma);
  g.eta = std::move(rates.eta);

  const auto d = g.ops.front().rows();
  g.lamb_shift = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < g.ops.size(); ++i)
    for (std::size_t j = 0; j < g.ops.size(); ++j) {
      const Complex e = g.eta(i, j);
      if (e != Complex(0.0)) g.lamb_shift += e * g.ops[i] * g.ops[j].adjoint();
    }
  return g;
}

// ---------------------------------------------------------------------------
// Liouvillian (column-stacked linearization, see core.hpp)

struct Liouvillian {
  Matrix matrix;
  Matrix hamiltonian_part;
  Matrix dissipator_part;

  Eigen::Index dimension() const {
    return static_cast<Eigen::Index>(std::llround(std::sqrt(double(matrix.rows()))));
  }

  Matrix apply(const Matrix& rho) const { return unvec(matrix * vec(rho), dimension()); }
};

/// sum_ij gamma_ij (A_j^dag X A_i - 1/2 {A_i A_j^dag, X}).
inline Matrix dissipator_superop(const Matrix& gamma, const std::vector<Matrix>& ops) {
  const auto d = ops.front().rows();
  Matrix out = Matrix::Zero(d * d, d * d);
  Matrix anti = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < ops.size(); ++i)
    for (std::size_t j = 0; j < ops.size(); ++j) {
      const Complex g = gamma(i, j);
      if (g == Complex(0.0)) continue;
      out += g * sandwich_superop(ops[j].adjoint(), ops[i]);
      anti += g * ops[i] * ops[j].adjoint();
    }
  out -= 0.5 * (left_superop(anti) + right_superop(anti));
  return out;
}

inline Liouvillian liouvillian(const SystemSpec& spec, const CoarseGrainedGenerator& gen,
                               const GapDecomposition& gaps) {
  if (spec.dimension() != gen.dimension())
    throw ValidationError("system and generator dimensions differ");
  if (gaps.eigenops.size() != gen.ops.size())
    throw ConfigurationError("generator was built from a different gap decomposition");
  Liouvillian l;
  l.hamiltonian_part = hamiltonian_superop(spec.hamiltonian + gen.lamb_shift);
  l.dissipator_part = dissipator_superop(gen.gamma, gen.ops);
  l.matrix = l.hamiltonian_part + l.dissipator_part;
  return l;
}

// ---------------------------------------------------------------------------
// diagonal GKSL form

/// gamma = U diag(rates) U^dag. The rotated operators f_k = sum_i U_ik A_i enter
/// the dissipator as rates_k (f_k^dag X f_k - 1/2 {f_k f_k^dag, X}); the usual
/// Lindblad jump operators are L_k = f_k^dag.
struct LindbladForm {
  RealVector rates;  // ascending
  Matrix unitary;
  std::vector<Matrix> rotated_ops;
  std::vector<Matrix> jump_ops;
};

inline LindbladForm lindblad_diagonal_form(const CoarseGrainedGenerator& gen) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(gen.gamma));
  const RealVector& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  if (ev(0) < -1e-10 * scale) {
    std::ostringstream os;
    os.precision(12);
    os << "gamma is not positive semi-definite (lambda_min = " << ev(0) << ")";
    throw NotCompletelyPositiveError(os.str(), ev(0));
  }
  LindbladForm f;
  f.rates = ev;
  f.unitary = es.eigenvectors();
  const auto d = gen.dimension();
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    Matrix fk = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < gen.ops.size(); ++i) fk += f.unitary(i, k) * gen.ops[i];
    f.jump_ops.push_back(fk.adjoint());
    f.rotated_ops.push_back(std::move(fk));
  }
  return f;
}

/// Dissipator rebuilt from the diagonal form; rates below 1e-10 * max rate are skipped.
inline Matrix dissipator_from(const LindbladForm& f) {
  const auto d = f.jump_ops.front().rows();
  const double scale = f.rates.cwiseAbs().maxCoeff();
  Matrix out = Matrix::Zero(d * d, d * d);
  for (Eigen::Index k = 0; k < f.rates.size(); ++k) {
    const double r = f.rates(k);
    if (std::abs(r) <= 1e-10 * scale) continue;
    const Matrix& L = f.jump_ops[k];
    const Matrix LdL = L.adjoint() * L;
    out += r * (sandwich_superop(L, L.adjoint()) - 0.5 * (left_superop(LdL) + right_superop(LdL)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// commutator audit

struct CommutatorAudit {
  Matrix hs_lamb;                // [H_S, H_LS]
  Matrix full_h_dissipator;      // [H_S^(dt) superop, D] = H o D - D o H
  Matrix bare_h_dissipator;      // [H_S superop, D]
  double hs_lamb_norm = 0.0;
  double full_h_dissipator_norm = 0.0;
  double bare_h_dissipator_norm = 0.0;
  double operator_scale = 0.0;   // |H_S| * |H_LS|, max-entry norms
  double superop_scale = 0.0;    // |H superop| * |D|, max-entry norms
};

inline CommutatorAudit commutator_audit(const SystemSpec& spec, const CoarseGrainedGenerator& gen,
                                        const GapDecomposition& gaps) {
  const Liouvillian l = liouvillian(spec, gen, gaps);
  const Matrix bare = hamiltonian_superop(spec.hamiltonian);
  const Matrix& dis = l.dissipator_part;

  CommutatorAudit a;
  a.hs_lamb = commutator(spec.hamiltonian, gen.lamb_shift);
  a.full_h_dissipator = commutator(l.hamiltonian_part, dis);
  a.bare_h_dissipator = commutator(bare, dis);
  a.hs_lamb_norm = spectral_norm(a.hs_lamb);
  a.full_h_dissipator_norm = spectral_norm(a.full_h_dissipator);
  a.bare_h_dissipator_norm = spectral_norm(a.bare_h_dissipator);
  a.operator_scale = std::max(max_abs_entry(spec.hamiltonian) *
                                  std::max(max_abs_entry(gen.lamb_shift), 1.0), 1.0);
  a.superop_scale = std::max(max_abs_entry(l.hamiltonian_part) * max_abs_entry(dis), 1.0);
  return a;
}

}  // namespace psa
