#pragma once

// Energy levels of the system Hamiltonian and the split of every coupling
// operator into eigenoperators A_{alpha,omega} = sum_eps pi_{eps+omega} A_alpha pi_eps.

#include "psa/core.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace psa {

/// System Hamiltonian H_S and the system sides A_alpha of the coupling terms.
struct SystemSpec {
  Matrix hamiltonian;
  std::vector<Matrix> couplings;

  Eigen::Index dimension() const { return hamiltonian.rows(); }
  std::size_t channels() const { return couplings.size(); }

  /// Throws ValidationError naming the offending matrix.
  void validate() const {
    if (hamiltonian.rows() == 0 || hamiltonian.rows() != hamiltonian.cols())
      throw ValidationError("hamiltonian must be a non-empty square matrix");
    if (!is_hermitian(hamiltonian)) throw ValidationError("hamiltonian is not Hermitian");
    if (couplings.empty()) throw ValidationError("at least one coupling operator is required");
    for (std::size_t a = 0; a < couplings.size(); ++a) {
      const Matrix& c = couplings[a];
      const std::string name = "coupling[" + std::to_string(a) + "]";
      if (c.rows() != hamiltonian.rows() || c.cols() != hamiltonian.cols())
        throw ValidationError(name + " has the wrong dimension");
      if (max_abs_entry(c) == 0.0) throw ValidationError(name + " is the zero matrix");
      if (!is_hermitian(c)) throw ValidationError(name + " is not Hermitian");
    }
  }
};

struct EnergyLevel {
  double energy;
  Matrix projector;
};

struct SpectralDecomposition {
  std::vector<EnergyLevel> levels;  // ascending energy
  double degeneracy_tol = 0.0;

  double spectral_range() const {
    return levels.empty() ? 0.0 : levels.back().energy - levels.front().energy;
  }

  Matrix reassemble() const {
    Matrix h = Matrix::Zero(levels.front().projector.rows(), levels.front().projector.cols());
    for (const auto& l : levels) h += l.energy * l.projector;
    return h;
  }
};

/// Diagonalize H_S and merge eigenvalues closer than `degeneracy_tol` into one level.
inline SpectralDecomposition eigendecompose(const SystemSpec& spec, double degeneracy_tol) {
  spec.validate();
  if (!(degeneracy_tol > 0.0)) throw ValidationError("degeneracy_tol must be positive");

  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(spec.hamiltonian));
  const RealVector& ev = es.eigenvalues();
  const Matrix& vecs = es.eigenvectors();

  SpectralDecomposition sd;
  sd.degeneracy_tol = degeneracy_tol;
  Eigen::Index start = 0;
  const Eigen::Index d = ev.size();
  while (start < d) {
    Eigen::Index stop = start + 1;
    while (stop < d && ev(stop) - ev(stop - 1) <= degeneracy_tol) ++stop;
    const Matrix block = vecs.middleCols(start, stop - start);
    sd.levels.push_back({ev.segment(start, stop - start).mean(), block * block.adjoint()});
    start = stop;
  }
  return sd;
}

/// One retained eigenoperator A_{alpha, omega}.
struct Eigenoperator {
  std::size_t channel;
  std::size_t gap_index;  // into GapDecomposition::gaps
  double gap;
  Matrix op;
};

struct GapDecomposition {
  std::vector<double> gaps;           // retained gaps, ascending
  std::vector<Eigenoperator> eigenops;  // ordered by (gap, channel); defines the index i = (alpha, omega)
  std::size_t channels = 0;
  std::size_t distinct_gaps = 0;  // G, all pairwise differences before pruning
  double gap_tol = 0.0;

  /// N = G * M, the number of (alpha, omega) pairs before pruning.
  std::size_t unpruned_pairs() const { return distinct_gaps * channels; }

  std::optional<std::size_t> find_gap(double omega) const {
    for (std::size_t g = 0; g < gaps.size(); ++g)
      if (std::abs(gaps[g] - omega) <= gap_tol) return g;
    return std::nullopt;
  }

  /// A_{alpha, omega}, or a zero matrix when the pair was pruned.
  Matrix op(std::size_t channel, double omega) const {
    for (const auto& e : eigenops)
      if (e.channel == channel && std::abs(e.gap - omega) <= gap_tol) return e.op;
    const auto d = eigenops.empty() ? 0 : eigenops.front().op.rows();
    return Matrix::Zero(d, d);
  }

  /// Sum over omega of A_{alpha, omega}.
  Matrix channel_sum(std::size_t channel, Eigen::Index dim) const {
    Matrix s = Matrix::Zero(dim, dim);
    for (const auto& e : eigenops)
      if (e.channel == channel) s += e.op;
    return s;
  }
};

namespace detail {

struct GapCluster {
  double value;
  std::vector<std::pair<std::size_t, std::size_t>> level_pairs;  // (upper, lower)
};

inline std::vector<GapCluster> cluster_gaps(const SpectralDecomposition& sd, double gap_tol) {
  struct Diff {
    double value;
    std::size_t upper, lower;
  };
  std::vector<Diff> diffs;
  for (std::size_t a = 0; a < sd.levels.size(); ++a)
    for (std::size_t b = 0; b < sd.levels.size(); ++b)
      diffs.push_back({sd.levels[a].energy - sd.levels[b].energy, a, b});
  std::sort(diffs.begin(), diffs.end(),
            [](const Diff& x, const Diff& y) { return x.value < y.value; });

  std::vector<GapCluster> clusters;
  std::size_t start = 0;
  while (start < diffs.size()) {
    std::size_t stop = start + 1;
    while (stop < diffs.size() && diffs[stop].value - diffs[stop - 1].value <= gap_tol) ++stop;
    GapCluster c{0.0, {}};
    for (std::size_t k = start; k < stop; ++k) {
      c.value += diffs[k].value;
      c.level_pairs.emplace_back(diffs[k].upper, diffs[k].lower);
    }
    c.value /= static_cast<double>(stop - start);
    // the zero cluster contains every (a, a) pair; pin it to exactly zero
    for (const auto& [u, l] : c.level_pairs)
      if (u == l) {
        c.value = 0.0;
        break;
      }
    clusters.push_back(std::move(c));
    start = stop;
  }
  return clusters;
}

}  // namespace detail

inline double default_gap_tol(const SpectralDecomposition& sd) {
  const double range = sd.spectral_range();
  return 1e-9 * (range > 0.0 ? range : 1.0);
}

/// Split each coupling into eigenoperators. Numerically zero A_{alpha,omega}
/// (max entry < 1e-14 * max|A_alpha|) are pruned; a gap survives if any channel does.
inline GapDecomposition gap_decompose(const SpectralDecomposition& sd,
                                      const std::vector<Matrix>& couplings, double gap_tol) {
  if (!(gap_tol > 0.0)) throw ValidationError("gap_tol must be positive");
  if (couplings.empty()) throw ValidationError("at least one coupling operator is required");
  if (sd.levels.empty()) throw ValidationError("empty spectral decomposition");

  const auto clusters = detail::cluster_gaps(sd, gap_tol);
  GapDecomposition out;
  out.channels = couplings.size();
  out.distinct_gaps = clusters.size();
  out.gap_tol = gap_tol;

  for (const auto& cluster : clusters) {
    std::vector<Eigenoperator> kept;
    for (std::size_t a = 0; a < couplings.size(); ++a) {
      const Matrix& coupling = couplings[a];
      Matrix op = Matrix::Zero(coupling.rows(), coupling.cols());
      for (const auto& [u, l] : cluster.level_pairs)
        op += sd.levels[u].projector * coupling * sd.levels[l].projector;
      if (max_abs_entry(op) >= 1e-14 * max_abs_entry(coupling))
        kept.push_back({a, out.gaps.size(), cluster.value, std::move(op)});
    }
    if (kept.empty()) continue;
    out.gaps.push_back(cluster.value);
    for (auto& e : kept) out.eigenops.push_back(std::move(e));
  }
  return out;
}

/// Convenience: eigendecompose + gap_decompose with default tolerances.
inline GapDecomposition decompose(const SystemSpec& spec, double degeneracy_tol = 1e-9) {
  const auto sd = eigendecompose(spec, degeneracy_tol);
  return gap_decompose(sd, spec.couplings, default_gap_tol(sd));
}

}  // namespace psa
