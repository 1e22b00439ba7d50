#pragma once

// Complete-positivity certification of gamma^(dt): direct eigenvalue test,
// the closed-form 2x2 dipole threshold and the matrix-dilution critical times.

#include "psa/bath.hpp"
#include "psa/core.hpp"
#include "psa/generator.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace psa {

/// Smallest eigenvalue of a Hermitian rate matrix.
inline double lambda_min(const Matrix& gamma) {
  if (!is_hermitian(gamma, 1e-10)) throw ValidationError("lambda_min expects a Hermitian matrix");
  return min_eigenvalue(hermitian_part(gamma));
}

/// PSD test at tolerance -1e-10 * |gamma|_2.
inline bool is_positive_semidefinite(const Matrix& gamma, double rel_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(gamma), Eigen::EigenvaluesOnly);
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues()(0) >= -rel_tol * scale;
}

// ---------------------------------------------------------------------------
// 2x2 dipole model

/// Closed-form rates of the single-mode dipole model, G = 2, M = 1.
struct DipoleRates {
  double kappa = 0.0;  // kappa at omega0
  double n = 0.0;      // occupation at omega0
  double q = 1.0;
  DipolePvTerms pv;

  double gamma_mm() const { return kappa * n; }
  double gamma_pp() const { return kappa * (1.0 + q * n); }

  /// gamma_{-+}^(dt) = [((q+1) n + 1) kappa / 2 - i I] * S
  Complex gamma_mp(double sinc) const {
    return Complex(0.5 * ((q + 1.0) * n + 1.0) * kappa, -pv.I) * sinc;
  }

  /// eta entries: eta_-- = I_-, eta_++ = I_+, eta_{+-} = [i (g++ - g--)/4 + (I_- + I_+)/2] S.
  double eta_mm() const { return pv.I_minus; }
  double eta_pp() const { return pv.I_plus; }
  Complex eta_pm(double sinc) const {
    return Complex(0.5 * (pv.I_minus + pv.I_plus), 0.25 * (gamma_pp() - gamma_mm())) * sinc;
  }

  /// Eigenvalues (gamma_-, gamma_+) of the 2x2 matrix at sinc value S.
  std::pair<double, double> eigenvalues(double sinc) const {
    const double s = gamma_pp() + gamma_mm();
    const double d = gamma_pp() - gamma_mm();
    const double root = std::sqrt(d * d + 4.0 * std::norm(gamma_mp(sinc)));
    return {0.5 * (s - root), 0.5 * (s + root)};
  }

  double determinant(double sinc) const {
    return gamma_pp() * gamma_mm() - std::norm(gamma_mp(sinc));
  }

  /// Largest |sinc| keeping the 2x2 gamma PSD (necessary and sufficient).
  double exact_threshold() const {
    const double num = 4.0 * kappa * kappa * n * (1.0 + q * n);
    const double a = n + 1.0 + q * n;
    const double den = kappa * kappa * a * a + 4.0 * pv.I * pv.I;
    if (den == 0.0) return 1.0;
    return std::min(1.0, std::sqrt(std::max(0.0, num) / den));
  }

  /// exact_threshold with the Lamb-shift integral I set to zero.
  double simple_bound() const {
    const double a = n + 1.0 + q * n;
    if (a == 0.0) return 1.0;
    return std::min(1.0, 2.0 * std::sqrt(std::max(0.0, n * (1.0 + q * n))) / a);
  }

  /// Sufficient sinc bound from matrix dilution specialised to G = 2:
  /// 2 kappa n / (sqrt((kappa n)^2 + 4 I_-^2) + sqrt((kappa (1+qn))^2 + 4 I_+^2)).
  double sufficient_bound() const {
    const double a = gamma_mm();
    const double b = gamma_pp();
    const double den = std::sqrt(a * a + 4.0 * pv.I_minus * pv.I_minus) +
                       std::sqrt(b * b + 4.0 * pv.I_plus * pv.I_plus);
    if (den == 0.0) return 1.0;
    return std::min(1.0, 2.0 * a / den);
  }
};

inline DipoleRates dipole_rates(const BathSpec& bath, double omega0, const DipolePvTerms& pv) {
  DipoleRates r;
  r.kappa = bath.kappa(omega0);
  r.n = bath.occupation(omega0);
  r.q = bath.q();
  r.pv = pv;
  return r;
}

// ---------------------------------------------------------------------------
// critical times via matrix dilution

struct DilutionRecord {
  double gap = 0.0;
  double omega_norm = 0.0;     // |Omega(omega)|_inf (spectral norm)
  double block_lambda_min = 0.0;  // min eig of Omega + Omega^dag
  double Q = 0.0;
  double K = 0.0;
  std::vector<double> q;          // q^(omega)_{omega'}, aligned with `others`
  std::vector<double> p_optimal;  // K / q
  std::vector<double> others;     // the gaps omega' != omega
};

struct CriticalTimes {
  double dtc0 = 0.0;
  double dtc1 = 0.0;
  double dtc2 = 0.0;
  bool trivial = false;  // single gap: no off-diagonal blocks, any dt is safe
  std::vector<DilutionRecord> dilution;
};

namespace detail {

inline double block_lambda(const Matrix& om) {
  const Matrix h = om + om.adjoint();
  const double lam = min_eigenvalue(h);
  // numerically singular blocks count as lambda = 0, forcing dt = inf
  return lam <= 1e-13 * std::max(max_abs_entry(h), 1e-300) ? 0.0 : lam;
}

inline double safe_ratio(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kInf : 0.0;
  return num / den;
}

}  // namespace detail

/// Sufficient critical times dtc0 <= dtc1 <= dtc2 from the Omega blocks alone.
inline CriticalTimes critical_times(const OmegaProvider& omega, const std::vector<double>& gaps) {
  CriticalTimes out;
  const std::size_t G = gaps.size();
  if (G == 0) throw ValidationError("critical_times needs at least one gap");
  if (G == 1) {
    out.trivial = true;
    return out;
  }
  std::vector<double> norms(G), lams(G);
  for (std::size_t g = 0; g < G; ++g) {
    const Matrix& om = omega.at(gaps[g]);
    norms[g] = spectral_norm(om);
    lams[g] = detail::block_lambda(om);
  }

  double nu_min = kInf;
  double dtc1 = 0.0, dtc0 = 0.0;
  for (std::size_t a = 0; a < G; ++a) {
    DilutionRecord rec;
    rec.gap = gaps[a];
    rec.omega_norm = norms[a];
    rec.block_lambda_min = lams[a];
    double sum_inverse_r = 0.0;
    for (std::size_t b = 0; b < G; ++b) {
      if (b == a) continue;
      const double diff = std::abs(gaps[a] - gaps[b]);
      const double norm_sum = norms[a] + norms[b];
      nu_min = std::min(nu_min, diff);
      dtc1 = std::max(dtc1, 2.0 * double(G - 1) * detail::safe_ratio(norm_sum, diff * lams[a]));
      const double r = diff / norm_sum;  // Q * q
      rec.others.push_back(gaps[b]);
      rec.q.push_back(r);
      rec.Q += r;
      sum_inverse_r += norm_sum / diff;
    }
    for (double& x : rec.q) x /= rec.Q;
    double sum_inverse_q = 0.0;
    for (double x : rec.q) sum_inverse_q += 1.0 / x;
    rec.K = 1.0 / sum_inverse_q;
    for (double x : rec.q) rec.p_optimal.push_back(rec.K / x);
    // 2 / (Q K lambda) = 2 sum_{w'} (|O(w)| + |O(w')|) / (|w - w'| lambda)
    dtc0 = std::max(dtc0, detail::safe_ratio(2.0 * sum_inverse_r, lams[a]));
    out.dilution.push_back(std::move(rec));
  }
  const double norm_max = *std::max_element(norms.begin(), norms.end());
  const double lam_min = *std::min_element(lams.begin(), lams.end());
  out.dtc0 = dtc0;
  out.dtc1 = dtc1;
  out.dtc2 = detail::safe_ratio(4.0 * double(G - 1) * norm_max, nu_min * lam_min);
  return out;
}

inline CriticalTimes critical_times(const OmegaProvider& omega) {
  return critical_times(omega, omega.gaps());
}

/// probabilities[a][b] = p^(omega_a)_{omega_b}; diagonal entries are ignored.
using DilutionProbabilities = std::vector<std::vector<double>>;

inline DilutionProbabilities flat_probabilities(std::size_t G) {
  DilutionProbabilities p(G, std::vector<double>(G, G > 1 ? 1.0 / double(G - 1) : 0.0));
  for (std::size_t a = 0; a < G; ++a) p[a][a] = 0.0;
  return p;
}

inline DilutionProbabilities optimal_probabilities(const CriticalTimes& ct) {
  const std::size_t G = ct.dilution.size();
  DilutionProbabilities p(G, std::vector<double>(G, 0.0));
  for (std::size_t a = 0; a < G; ++a) {
    std::size_t k = 0;
    for (std::size_t b = 0; b < G; ++b)
      if (b != a) p[a][b] = ct.dilution[a].p_optimal[k++];
  }
  return p;
}

/// True iff dt >= (2 / p) (|O(w)| + |O(w')|) / (|w - w'| lambda(w)) for every
/// ordered pair. Comparisons carry a 1e-12 relative slack so that a time
/// produced by critical_times passes its own bound.
inline bool verify_dilution(const OmegaProvider& omega, const std::vector<double>& gaps,
                            const DilutionProbabilities& probabilities, double delta_t) {
  const std::size_t G = gaps.size();
  if (probabilities.size() != G) throw ValidationError("probability table has the wrong size");
  for (std::size_t a = 0; a < G; ++a) {
    if (probabilities[a].size() != G) throw ValidationError("probability table has the wrong size");
    double sum = 0.0;
    for (std::size_t b = 0; b < G; ++b) {
      if (b == a) continue;
      if (probabilities[a][b] < 0.0) throw ValidationError("dilution probabilities must be >= 0");
      sum += probabilities[a][b];
    }
    if (G > 1 && std::abs(sum - 1.0) > 1e-12)
      throw ValidationError("dilution probabilities must sum to one for every gap");
  }
  if (std::isinf(delta_t)) return true;
  for (std::size_t a = 0; a < G; ++a) {
    const Matrix& oa = omega.at(gaps[a]);
    const double na = spectral_norm(oa);
    const double lam = detail::block_lambda(oa);
    for (std::size_t b = 0; b < G; ++b) {
      if (b == a) continue;
      const double nb = spectral_norm(omega.at(gaps[b]));
      const double p = probabilities[a][b];
      const double diff = std::abs(gaps[a] - gaps[b]);
      const double bound = detail::safe_ratio(2.0 * (na + nb), p * diff * lam);
      if (delta_t < bound * (1.0 - 1e-12)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// report

struct PositivityReport {
  std::optional<double> lambda_min;
  bool is_cp = true;
  CriticalTimes times;
};

inline PositivityReport certify(const OmegaProvider& omega, const CoarseGraining& cg) {
  PositivityReport r;
  const Matrix gamma = coarse_grained_gamma(omega, cg);
  r.lambda_min = lambda_min(gamma);
  r.is_cp = is_positive_semidefinite(gamma);
  r.times = critical_times(omega);
  return r;
}

}  // namespace psa
