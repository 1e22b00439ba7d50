#pragma once

// Thermal bath data: occupation numbers, continuum decay rates kappa_eps,
// principal-value quadrature and the half-range Fourier matrices Omega(omega).

#include "psa/core.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace psa {

enum class Statistics { Bosonic = 1, Fermionic = -1 };

inline double sign_of(Statistics q) { return q == Statistics::Bosonic ? 1.0 : -1.0; }

inline const char* to_string(Statistics q) {
  return q == Statistics::Bosonic ? "bosonic" : "fermionic";
}

/// n = 1 / (e^{beta eps} - q). beta may be +inf (zero temperature).
inline double occupation(double beta, Statistics q, double energy) {
  if (beta < 0.0 || std::isnan(beta)) throw ValidationError("beta must be >= 0");
  if (energy < 0.0 || (energy == 0.0 && q == Statistics::Bosonic))
    throw DomainError("Bose occupation is singular for energy <= 0");
  if (energy == 0.0) return 0.5;
  if (std::isinf(beta)) return 0.0;
  // expm1 keeps the bosonic eps -> 0 branch accurate
  return 1.0 / (std::expm1(beta * energy) + (1.0 - sign_of(q)));
}

/// kappa_eps = kappa0 * eps * exp(-eps / omega_c): ohmic at low energy, exponential cutoff.
struct OhmicExponential {
  double kappa0 = 0.0;
  double omega_c = 1.0;

  double operator()(double energy) const {
    return energy <= 0.0 ? 0.0 : kappa0 * energy * std::exp(-energy / omega_c);
  }
};

/// Piecewise-linear kappa_eps from samples. Below the first sample the curve is
/// interpolated towards (0, 0); above the last sample it vanishes.
struct TabulatedDecayRate {
  std::vector<double> energy;
  std::vector<double> rate;

  void validate() const {
    if (energy.size() < 2 || energy.size() != rate.size())
      throw ValidationError("tabulated decay rate needs at least two (energy, rate) samples");
    if (energy.front() < 0.0) throw ValidationError("tabulated energies must be >= 0");
    for (std::size_t k = 1; k < energy.size(); ++k)
      if (!(energy[k] > energy[k - 1]))
        throw ValidationError("tabulated energies must be strictly increasing");
    for (double r : rate)
      if (!(r >= 0.0)) throw ValidationError("tabulated decay rates must be >= 0");
  }

  double operator()(double e) const {
    if (e <= 0.0 || e > energy.back()) return 0.0;
    if (e < energy.front()) return rate.front() * e / energy.front();
    const auto it = std::upper_bound(energy.begin(), energy.end(), e);
    const std::size_t hi = std::min<std::size_t>(it - energy.begin(), energy.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = (e - energy[lo]) / (energy[hi] - energy[lo]);
    return (1.0 - w) * rate[lo] + w * rate[hi];
  }

  /// Two-column CSV (energy, rate). Blank lines, '#' comments and a non-numeric
  /// header row are skipped.
  static TabulatedDecayRate parse_csv(std::istream& in) {
    TabulatedDecayRate t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos)
        throw ValidationError("decay-rate CSV line " + std::to_string(lineno) + ": expected two columns");
      auto parse = [&](std::string s, double& out) {
        s.erase(0, s.find_first_not_of(" \t\r"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
        return res.ec == std::errc() && res.ptr == s.data() + s.size();
      };
      double e = 0.0, r = 0.0;
      const bool ok = parse(line.substr(0, comma), e) && parse(line.substr(comma + 1), r);
      if (!ok) {
        if (t.energy.empty() && lineno == 1) continue;  // header
        throw ValidationError("decay-rate CSV line " + std::to_string(lineno) + ": not numeric");
      }
      t.energy.push_back(e);
      t.rate.push_back(r);
    }
    t.validate();
    return t;
  }

  static TabulatedDecayRate load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open decay-rate CSV: " + path);
    return parse_csv(in);
  }
};

using DecayRate = std::variant<OhmicExponential, TabulatedDecayRate>;

struct BathSpec {
  Statistics statistics = Statistics::Bosonic;
  double beta = 1.0;  // +inf allowed
  DecayRate decay_rate = OhmicExponential{};
  std::optional<double> integration_cutoff;

  double q() const { return sign_of(statistics); }

  double kappa(double energy) const {
    return std::visit([energy](const auto& k) { return k(energy); }, decay_rate);
  }

  /// Energy beyond which kappa is treated as zero: 40 omega_c for the ohmic
  /// family, the last sample for tabulated curves.
  double cutoff() const {
    if (integration_cutoff) return *integration_cutoff;
    if (const auto* o = std::get_if<OhmicExponential>(&decay_rate)) return 40.0 * o->omega_c;
    return std::get<TabulatedDecayRate>(decay_rate).energy.back();
  }

  double occupation(double energy) const { return psa::occupation(beta, statistics, energy); }

  /// kappa_eps * n_eps, finite as eps -> 0 for bosons.
  double kappa_occupation(double energy) const {
    if (energy <= 0.0) return 0.0;
    if (std::isinf(beta)) return 0.0;
    return kappa(energy) / (std::expm1(beta * energy) + (1.0 - q()));
  }

  void validate() const {
    if (std::isnan(beta) || beta < 0.0) throw ValidationError("beta must be >= 0 (or +inf)");
    if (const auto* o = std::get_if<OhmicExponential>(&decay_rate)) {
      if (!(o->kappa0 >= 0.0)) throw ValidationError("kappa0 must be >= 0");
      if (!(o->omega_c > 0.0)) throw ValidationError("omega_c must be > 0");
    } else {
      std::get<TabulatedDecayRate>(decay_rate).validate();
    }
    if (integration_cutoff && !(*integration_cutoff > 0.0))
      throw ValidationError("integration cutoff must be > 0");
  }
};

// ---------------------------------------------------------------------------
// principal-value quadrature

struct QuadratureOptions {
  double rel_tol = 1e-12;
  unsigned max_depth = 25;
  /// Half-width of the subtraction window; <= 0 selects min(pole, cutoff - pole) / 2.
  double window = 0.0;
};

namespace detail {

template <class F>
double adaptive_gk(F&& f, double a, double b, const QuadratureOptions& opt, double& err,
                   double& l1) {
  err = 0.0;
  l1 = 0.0;
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, opt.max_depth,
                                                                       opt.rel_tol, &err, &l1);
}

}  // namespace detail

/// PV integral_0^cutoff g(eps) / (eps - pole) d eps for a numerator g smooth at the pole.
///
/// A symmetric window (pole - w, pole + w) is folded onto (0, w) where the
/// integrand becomes (g(pole + x) - g(pole - x)) / x; outside it ordinary
/// adaptive Gauss-Kronrod is used.
template <class F>
double pv_integral(F&& numerator, double pole, double cutoff, const QuadratureOptions& opt = {}) {
  if (!(pole > 0.0 && pole < cutoff)) throw DomainError("pole must lie strictly inside (0, cutoff)");
  const double w = opt.window > 0.0 ? std::min({opt.window, pole, cutoff - pole})
                                    : 0.5 * std::min(pole, cutoff - pole);

  double e1, e2, e3, l1, l2, l3;
  const double left = detail::adaptive_gk(
      [&](double e) { return numerator(e) / (e - pole); }, 0.0, pole - w, opt, e1, l1);
  const double window = detail::adaptive_gk(
      [&](double x) { return (numerator(pole + x) - numerator(pole - x)) / x; }, 0.0, w, opt, e2,
      l2);
  const double right = detail::adaptive_gk(
      [&](double e) { return numerator(e) / (e - pole); }, pole + w, cutoff, opt, e3, l3);

  const double result = left + window + right;
  const double residual = e1 + e2 + e3;
  const double scale = l1 + l2 + l3;
  if (!std::isfinite(result) || residual > 10.0 * opt.rel_tol * scale + 1e-300)
    throw QuadratureError("principal-value quadrature did not converge", residual);
  return result;
}

/// The three Lamb-shift integrals of the dipole model:
///   I   = (w0/pi)  PV int ((q+1) n + 1) kappa / (eps^2 - w0^2)
///   I_- = (1/2pi)  PV int kappa [ n/(eps - w0) + (1+qn)/(-eps - w0) ]
///   I_+ = (1/2pi)  PV int kappa [ n/(eps + w0) + (1+qn)/(-eps + w0) ]
struct DipolePvTerms {
  double I = 0.0;
  double I_minus = 0.0;
  double I_plus = 0.0;
};

inline DipolePvTerms dipole_pv_terms(const BathSpec& bath, double omega0,
                                     const QuadratureOptions& opt = {}) {
  bath.validate();
  const double cutoff = bath.cutoff();
  if (!(omega0 > 0.0 && omega0 < cutoff))
    throw DomainError("omega0 must lie inside the bath support (0, cutoff)");
  const double q = bath.q();
  auto kn = [&](double e) { return bath.kappa_occupation(e); };
  auto k_emit = [&](double e) { return bath.kappa(e) + q * bath.kappa_occupation(e); };

  DipolePvTerms out;
  out.I = pv_integral(
      [&](double e) { return (omega0 / kPi) * ((q + 1.0) * kn(e) + bath.kappa(e)) / (e + omega0); },
      omega0, cutoff, opt);
  out.I_minus = pv_integral(
      [&](double e) {
        return (kn(e) - k_emit(e) * (e - omega0) / (e + omega0)) / (2.0 * kPi);
      },
      omega0, cutoff, opt);
  out.I_plus = pv_integral(
      [&](double e) {
        return (kn(e) * (e - omega0) / (e + omega0) - k_emit(e)) / (2.0 * kPi);
      },
      omega0, cutoff, opt);
  return out;
}

// ---------------------------------------------------------------------------
// Omega(omega)

/// Map gap -> M x M matrix Omega(omega) = int_0^inf c(tau) e^{i omega tau} d tau.
class OmegaProvider {
 public:
  OmegaProvider() = default;

  void set(double omega, Matrix value) {
    if (value.rows() == 0 || value.rows() != value.cols())
      throw ValidationError("Omega(omega) must be a non-empty square matrix");
    if (!entries_.empty() && value.rows() != entries_.front().second.rows())
      throw ValidationError("all Omega(omega) matrices must share the channel count");
    for (auto& [w, m] : entries_)
      if (same_gap(w, omega)) {
        m = std::move(value);
        return;
      }
    entries_.emplace_back(omega, std::move(value));
    std::sort(entries_.begin(), entries_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  const Matrix* find(double omega) const {
    for (const auto& [w, m] : entries_)
      if (same_gap(w, omega)) return &m;
    return nullptr;
  }

  const Matrix& at(double omega) const {
    if (const Matrix* m = find(omega)) return *m;
    std::ostringstream os;
    os.precision(17);
    os << "no Omega entry for gap omega = " << omega;
    throw ConfigurationError(os.str());
  }

  std::vector<double> gaps() const {
    std::vector<double> g;
    for (const auto& e : entries_) g.push_back(e.first);
    return g;
  }

  std::size_t size() const { return entries_.size(); }
  Eigen::Index channels() const { return entries_.empty() ? 0 : entries_.front().second.rows(); }
  const std::vector<std::pair<double, Matrix>>& entries() const { return entries_; }

  /// Omega(omega) + Omega(omega)^dag for one gap (the secular block).
  Matrix secular_block(double omega) const {
    const Matrix& m = at(omega);
    return m + m.adjoint();
  }

 private:
  static bool same_gap(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
  }

  std::vector<std::pair<double, Matrix>> entries_;
};

/// Omega(-w0) = kappa n / 2 + i I_-,  Omega(+w0) = kappa (1 + q n) / 2 + i I_+  (M = 1).
inline OmegaProvider dipole_omega(const BathSpec& bath, double omega0,
                                  const DipolePvTerms& pv) {
  const double kappa = bath.kappa(omega0);
  const double n = bath.occupation(omega0);
  OmegaProvider p;
  p.set(-omega0, Matrix::Constant(1, 1, Complex(0.5 * kappa * n, pv.I_minus)));
  p.set(+omega0, Matrix::Constant(1, 1, Complex(0.5 * kappa * (1.0 + bath.q() * n), pv.I_plus)));
  return p;
}

inline OmegaProvider dipole_omega(const BathSpec& bath, double omega0,
                                  const QuadratureOptions& opt = {}) {
  return dipole_omega(bath, omega0, dipole_pv_terms(bath, omega0, opt));
}

}  // namespace psa
