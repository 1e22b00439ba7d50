#pragma once

// Preset builders for a two-level system or truncated oscillator coupled
// through zeta + zeta^dag to a bosonic or fermionic bath.

#include "psa/bath.hpp"
#include "psa/core.hpp"
#include "psa/dynamics.hpp"
#include "psa/generator.hpp"
#include "psa/positivity.hpp"
#include "psa/spectral.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace psa {

enum class DipoleSystem { Oscillator = 1, Qubit = -1 };

inline const char* to_string(DipoleSystem s) {
  return s == DipoleSystem::Qubit ? "qubit" : "oscillator";
}

struct DipoleModel {
  DipoleSystem system = DipoleSystem::Qubit;
  Statistics statistics = Statistics::Bosonic;
  double omega0 = 1.0;
  double beta = 2.0;
  double kappa0 = 2.0;
  double omega_c = 5.0;
  int n_max = 30;  // oscillator ladder size
  CoarseGraining coarse_graining = CoarseGraining::secular();
  std::optional<TabulatedDecayRate> tabulated_rate;  // replaces the ohmic family when set
  std::optional<double> integration_cutoff;
  QuadratureOptions quadrature;

  void validate() const {
    if (!(omega0 > 0.0)) throw ValidationError("omega0 must be > 0");
    if (std::isnan(beta) || beta < 0.0) throw ValidationError("beta must be >= 0 (or +inf)");
    if (!tabulated_rate) {
      if (!(omega_c > 0.0)) throw ValidationError("omega_c must be > 0");
      if (!(kappa0 >= 0.0)) throw ValidationError("kappa0 must be >= 0");
    }
    if (system == DipoleSystem::Oscillator && n_max < 2)
      throw ValidationError("n_max must be >= 2 for the oscillator");
    bath().validate();
  }

  BathSpec bath() const {
    BathSpec b;
    b.statistics = statistics;
    b.beta = beta;
    if (tabulated_rate)
      b.decay_rate = *tabulated_rate;
    else
      b.decay_rate = OhmicExponential{kappa0, omega_c};
    b.integration_cutoff = integration_cutoff;
    return b;
  }

  /// S = sinc(omega0 dt), or the injected value.
  double sinc() const { return coarse_graining.factor(-omega0, omega0); }
};

/// zeta: sigma_- = |0><1| for the qubit, the truncated annihilator otherwise.
inline Matrix lowering_operator(const DipoleModel& m) {
  const Eigen::Index d = m.system == DipoleSystem::Qubit ? 2 : m.n_max;
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index k = 1; k < d; ++k) a(k - 1, k) = std::sqrt(double(k));
  return a;
}

inline Matrix number_operator(Eigen::Index d) {
  Matrix n = Matrix::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) n(k, k) = double(k);
  return n;
}

/// H_S = omega0 zeta^dag zeta, single coupling zeta + zeta^dag.
inline SystemSpec dipole_system(const DipoleModel& m) {
  const Matrix z = lowering_operator(m);
  SystemSpec s;
  s.hamiltonian = m.omega0 * z.adjoint() * z;
  s.couplings = {z + z.adjoint()};
  return s;
}

struct DipolePipeline {
  DipoleModel model;
  SystemSpec spec;
  SpectralDecomposition spectral;
  GapDecomposition gaps;
  BathSpec bath;
  DipolePvTerms pv;
  OmegaProvider omega;
  CoarseGrainedGenerator generator;
  Liouvillian liouvillian;
};

inline DipolePipeline build_dipole(const DipoleModel& model) {
  model.validate();
  DipolePipeline p;
  p.model = model;
  p.spec = dipole_system(model);
  p.spectral = eigendecompose(p.spec, 1e-9 * model.omega0);
  p.gaps = gap_decompose(p.spectral, p.spec.couplings, default_gap_tol(p.spectral));
  p.bath = model.bath();
  p.pv = dipole_pv_terms(p.bath, model.omega0, model.quadrature);
  p.omega = dipole_omega(p.bath, model.omega0, p.pv);
  p.generator = build_generator(p.gaps, p.omega, model.coarse_graining);
  p.liouvillian = liouvillian(p.spec, p.generator, p.gaps);
  return p;
}

inline DipoleRates dipole_rates(const DipoleModel& model) {
  model.validate();
  const BathSpec bath = model.bath();
  return dipole_rates(bath, model.omega0, dipole_pv_terms(bath, model.omega0, model.quadrature));
}

inline double exact_threshold_dipole(const DipoleModel& model) {
  return dipole_rates(model).exact_threshold();
}

inline double sufficient_sinc_bound_dipole(const DipoleModel& model) {
  return dipole_rates(model).sufficient_bound();
}

namespace detail {

/// Positions of (channel 0, -omega0) and (channel 0, +omega0) in the generator index.
inline std::pair<Eigen::Index, Eigen::Index> dipole_slots(const DipolePipeline& p) {
  Eigen::Index lo = -1, hi = -1;
  const auto& idx = p.generator.index_map;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (same_gap(idx[i].gap, -p.model.omega0)) lo = Eigen::Index(i);
    if (same_gap(idx[i].gap, p.model.omega0)) hi = Eigen::Index(i);
  }
  if (lo < 0 || hi < 0 || idx.size() != 2)
    throw ConfigurationError("dipole generator must hold exactly the gaps -omega0 and +omega0");
  return {lo, hi};
}

}  // namespace detail

/// Qubit parameters read off the generically built generator.
inline QubitParams qubit_params(const DipolePipeline& p) {
  if (p.model.system != DipoleSystem::Qubit) throw ConfigurationError("model is not a qubit");
  const auto [m, pl] = detail::dipole_slots(p);
  const Matrix& g = p.generator.gamma;
  const Matrix& e = p.generator.eta;
  QubitParams q;
  q.omega_bar = p.model.omega0 + e(pl, pl).real() - e(m, m).real();
  q.gamma_mm = g(m, m).real();
  q.gamma_pp = g(pl, pl).real();
  q.gamma_mp = g(m, pl);
  return q;
}

/// Oscillator moment parameters read off the generically built generator.
inline QhoParams qho_params(const DipolePipeline& p) {
  if (p.model.system != DipoleSystem::Oscillator)
    throw ConfigurationError("model is not an oscillator");
  const auto [m, pl] = detail::dipole_slots(p);
  const Matrix& g = p.generator.gamma;
  const Matrix& e = p.generator.eta;
  QhoParams q;
  q.omega_bar = p.model.omega0 + e(m, m).real() + e(pl, pl).real();
  q.eta_pm = e(pl, m);
  q.gamma_mm = g(m, m).real();
  q.gamma_pp = g(pl, pl).real();
  q.gamma_pm = g(pl, m);
  return q;
}

/// The same parameters from the closed-form rates, bypassing the generic path.
inline QubitParams qubit_params(const DipoleRates& r, double omega0, double sinc) {
  QubitParams q;
  q.omega_bar = omega0 + r.eta_pp() - r.eta_mm();
  q.gamma_mm = r.gamma_mm();
  q.gamma_pp = r.gamma_pp();
  q.gamma_mp = r.gamma_mp(sinc);
  return q;
}

inline QhoParams qho_params(const DipoleRates& r, double omega0, double sinc) {
  QhoParams q;
  q.omega_bar = omega0 + r.eta_mm() + r.eta_pp();
  q.eta_pm = r.eta_pm(sinc);
  q.gamma_mm = r.gamma_mm();
  q.gamma_pp = r.gamma_pp();
  q.gamma_pm = std::conj(r.gamma_mp(sinc));
  return q;
}

/// Ground state |0><0| and the |+><+| state.
inline Matrix ground_state(Eigen::Index d) {
  Matrix rho = Matrix::Zero(d, d);
  rho(0, 0) = 1.0;
  return rho;
}

inline Matrix plus_state() { return Matrix::Constant(2, 2, Complex(0.5)); }

}  // namespace psa
