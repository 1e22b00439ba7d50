#pragma once

// Configuration-driven commands behind the psagen executable. Configs are
// JSON documents; commands return the full CSV or JSON text they produce.

#include "psa/dipole.hpp"
#include "psa/dynamics.hpp"
#include "psa/positivity.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace psa::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

enum ExitCode { kSuccess = 0, kFailure = 1, kValidation = 2, kNumerical = 3 };

// ---------------------------------------------------------------------------
// worker pool

/// Calls body(k) for k in [0, n) on up to `threads` workers. Results must be
/// written by index; the exception of the lowest failing index is rethrown.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        body(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// output

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

struct CsvTable {
  std::vector<std::string> metadata;  // without the leading '#'
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string str() const {
    std::ostringstream os;
    for (const auto& m : metadata) os << "# " << m << '\n';
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << format_number(r[c]);
      os << '\n';
    }
    return os.str();
  }
};

/// JSON has no infinity; encode it as the string "inf".
inline ordered_json number_or_inf(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return nullptr;
  return x;
}

// ---------------------------------------------------------------------------
// configuration

struct Grid {
  std::string parameter;
  std::vector<double> values;
};

struct RunConfig {
  json source;  // parsed document, echoed into outputs
  std::filesystem::path base_dir;
  DipoleModel model;
  std::optional<Grid> sweep;
  std::vector<double> times;
  std::vector<double> omega_c_series;
  std::vector<Statistics> statistics_series;
  std::string initial_state = "plus";
  bool check_liouvillian = true;
  std::optional<OmegaProvider> omega_set;
  std::vector<double> scan_delta_t;
  std::string output_path;
};

namespace detail {

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
}

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
        allowed.end())
      throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

inline double number(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
  }
  throw ValidationError(what + " must be a number");
}

inline void check_increasing(const std::vector<double>& v, const std::string& what) {
  if (v.empty()) throw ValidationError(what + " must not be empty");
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] > v[k - 1])) throw ValidationError(what + " must be strictly increasing");
}

/// Either an explicit list or {start, stop, count[, spacing: linear|log]}.
inline std::vector<double> parse_grid(const json& j, const std::string& what) {
  std::vector<double> v;
  if (j.is_array()) {
    for (const auto& x : j) v.push_back(number(x, what));
  } else if (j.is_object()) {
    check_keys(j, what, {"start", "stop", "count", "spacing"});
    if (!j.contains("start") || !j.contains("stop") || !j.contains("count"))
      throw ValidationError(what + " needs start, stop and count");
    const double a = number(j["start"], what + ".start");
    const double b = number(j["stop"], what + ".stop");
    if (!j["count"].is_number_integer()) throw ValidationError(what + ".count must be an integer");
    const long n = j["count"].get<long>();
    const std::string spacing = j.value("spacing", "linear");
    if (n < 1) throw ValidationError(what + ".count must be >= 1");
    if (spacing != "linear" && spacing != "log")
      throw ValidationError(what + ".spacing must be 'linear' or 'log'");
    if (spacing == "log" && !(a > 0.0 && b > 0.0))
      throw ValidationError(what + " log spacing needs positive bounds");
    for (long k = 0; k < n; ++k) {
      const double f = n == 1 ? 0.0 : double(k) / double(n - 1);
      v.push_back(spacing == "log" ? a * std::pow(b / a, f) : a + (b - a) * f);
    }
    if (n > 1) v.back() = b;
  } else {
    throw ValidationError(what + " must be a list or a {start, stop, count} object");
  }
  check_increasing(v, what);
  return v;
}

inline Statistics parse_statistics(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "bosonic" || s == "boson") return Statistics::Bosonic;
    if (s == "fermionic" || s == "fermion") return Statistics::Fermionic;
  }
  if (j.is_number_integer()) {
    if (j.get<int>() == 1) return Statistics::Bosonic;
    if (j.get<int>() == -1) return Statistics::Fermionic;
  }
  throw ValidationError("statistics must be 'bosonic', 'fermionic', +1 or -1");
}

inline CoarseGraining parse_coarse_graining(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "secular") return CoarseGraining::secular();
    if (s == "redfield") return CoarseGraining::redfield();
    throw ValidationError("coarse_graining must be 'secular', 'redfield' or an object");
  }
  require_object(j, "coarse_graining");
  check_keys(j, "coarse_graining", {"sinc", "delta_t"});
  if (j.contains("sinc") == j.contains("delta_t"))
    throw ValidationError("coarse_graining needs exactly one of 'sinc' and 'delta_t'");
  if (j.contains("sinc")) return CoarseGraining::uniform_sinc(number(j["sinc"], "coarse_graining.sinc"));
  return CoarseGraining::time(number(j["delta_t"], "coarse_graining.delta_t"));
}

inline CoarseGraining coarse_graining_for(const std::string& parameter, double value) {
  if (parameter == "sinc") return CoarseGraining::uniform_sinc(value);
  return CoarseGraining::time(value);
}

inline DipoleModel parse_model(const json& j, const std::filesystem::path& base) {
  require_object(j, "model");
  check_keys(j, "model",
             {"system", "statistics", "omega0", "temperature", "beta", "kappa0", "omega_c", "n_max",
              "coarse_graining", "decay_rate_table", "integration_cutoff", "quadrature_rel_tol"});
  DipoleModel m;
  if (j.contains("system")) {
    const auto s = j["system"].get<std::string>();
    if (s == "qubit") m.system = DipoleSystem::Qubit;
    else if (s == "oscillator" || s == "qho") m.system = DipoleSystem::Oscillator;
    else throw ValidationError("model.system must be 'qubit' or 'oscillator'");
  }
  if (j.contains("statistics")) m.statistics = parse_statistics(j["statistics"]);
  if (j.contains("omega0")) m.omega0 = number(j["omega0"], "model.omega0");
  if (j.contains("temperature") && j.contains("beta"))
    throw ValidationError("model accepts either 'temperature' or 'beta', not both");
  if (j.contains("temperature")) {
    const double t = number(j["temperature"], "model.temperature");
    if (!(t >= 0.0)) throw ValidationError("model.temperature must be >= 0");
    m.beta = t == 0.0 ? kInf : 1.0 / t;
  }
  if (j.contains("beta")) m.beta = number(j["beta"], "model.beta");
  if (j.contains("kappa0")) m.kappa0 = number(j["kappa0"], "model.kappa0");
  if (j.contains("omega_c")) m.omega_c = number(j["omega_c"], "model.omega_c");
  if (j.contains("n_max")) {
    if (!j["n_max"].is_number_integer()) throw ValidationError("model.n_max must be an integer");
    m.n_max = j["n_max"].get<int>();
  }
  if (j.contains("coarse_graining")) m.coarse_graining = parse_coarse_graining(j["coarse_graining"]);
  if (j.contains("decay_rate_table")) {
    const std::filesystem::path p = base / j["decay_rate_table"].get<std::string>();
    m.tabulated_rate = TabulatedDecayRate::load_csv(p.string());
  }
  if (j.contains("integration_cutoff"))
    m.integration_cutoff = number(j["integration_cutoff"], "model.integration_cutoff");
  if (j.contains("quadrature_rel_tol"))
    m.quadrature.rel_tol = number(j["quadrature_rel_tol"], "model.quadrature_rel_tol");
  // below ~1e-15 the adaptive rule can only exhaust its depth
  if (!(m.quadrature.rel_tol >= 1e-15 && m.quadrature.rel_tol < 1.0))
    throw ValidationError("model.quadrature_rel_tol must lie in [1e-15, 1)");
  return m;
}

/// Each matrix is a list of rows; entries are numbers or [re, im] pairs.
inline Matrix parse_complex_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ValidationError(what + " must be a non-empty list of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[std::size_t(r)];
    if (!row.is_array() || Eigen::Index(row.size()) != rows)
      throw ValidationError(what + " must be square");
    for (Eigen::Index c = 0; c < rows; ++c) {
      const json& x = row[std::size_t(c)];
      if (x.is_array() && x.size() == 2)
        m(r, c) = Complex(number(x[0], what), number(x[1], what));
      else
        m(r, c) = number(x, what);
    }
  }
  return m;
}

inline OmegaProvider parse_omega_set(const json& j) {
  require_object(j, "omega_set");
  check_keys(j, "omega_set", {"gaps", "omega"});
  if (!j.contains("gaps") || !j.contains("omega"))
    throw ValidationError("omega_set needs 'gaps' and 'omega'");
  const auto gaps = parse_grid(j["gaps"], "omega_set.gaps");
  if (!j["omega"].is_array() || j["omega"].size() != gaps.size())
    throw ValidationError("omega_set.omega must hold one matrix per gap");
  OmegaProvider p;
  for (std::size_t g = 0; g < gaps.size(); ++g) {
    Matrix om = parse_complex_matrix(j["omega"][g], "omega_set.omega[" + std::to_string(g) + "]");
    const Eigen::SelfAdjointEigenSolver<Matrix> es(om + om.adjoint(), Eigen::EigenvaluesOnly);
    const double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    if (es.eigenvalues()(0) < -1e-12 * scale)
      throw ValidationError("omega_set.omega[" + std::to_string(g) +
                            "] has a Hermitian part that is not positive semi-definite");
    p.set(gaps[g], std::move(om));
  }
  return p;
}

}  // namespace detail

inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  detail::require_object(j, "config");
  detail::check_keys(j, "config", {"description", "model", "sweep", "times", "series", "options",
                                    "omega_set", "output"});
  RunConfig c;
  c.source = j;
  c.base_dir = base_dir;
  if (j.contains("model")) c.model = detail::parse_model(j["model"], base_dir);
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    detail::require_object(s, "sweep");
    detail::check_keys(s, "sweep", {"parameter", "grid"});
    if (!s.contains("parameter") || !s.contains("grid"))
      throw ValidationError("sweep needs 'parameter' and 'grid'");
    Grid g;
    g.parameter = s["parameter"].get<std::string>();
    if (g.parameter != "sinc" && g.parameter != "delta_t" && g.parameter != "temperature")
      throw ValidationError("sweep.parameter must be 'sinc', 'delta_t' or 'temperature'");
    g.values = detail::parse_grid(s["grid"], "sweep.grid");
    c.sweep = std::move(g);
  }
  if (j.contains("times")) c.times = detail::parse_grid(j["times"], "times");
  if (j.contains("series")) {
    const json& s = j["series"];
    detail::require_object(s, "series");
    detail::check_keys(s, "series", {"omega_c", "statistics"});
    if (s.contains("omega_c")) c.omega_c_series = detail::parse_grid(s["omega_c"], "series.omega_c");
    if (s.contains("statistics")) {
      if (!s["statistics"].is_array() || s["statistics"].empty())
        throw ValidationError("series.statistics must be a non-empty list");
      for (const auto& x : s["statistics"]) c.statistics_series.push_back(detail::parse_statistics(x));
    }
  }
  if (j.contains("options")) {
    const json& o = j["options"];
    detail::require_object(o, "options");
    detail::check_keys(o, "options", {"initial_state", "check_liouvillian", "scan_delta_t"});
    if (o.contains("initial_state")) {
      c.initial_state = o["initial_state"].get<std::string>();
      if (c.initial_state != "plus" && c.initial_state != "ground" && c.initial_state != "excited")
        throw ValidationError("options.initial_state must be 'plus', 'ground' or 'excited'");
    }
    if (o.contains("check_liouvillian")) c.check_liouvillian = o["check_liouvillian"].get<bool>();
    if (o.contains("scan_delta_t")) c.scan_delta_t = detail::parse_grid(o["scan_delta_t"], "options.scan_delta_t");
  }
  if (j.contains("omega_set")) c.omega_set = detail::parse_omega_set(j["omega_set"]);
  if (j.contains("output")) {
    const json& o = j["output"];
    detail::require_object(o, "output");
    detail::check_keys(o, "output", {"path", "format"});
    if (o.contains("path")) c.output_path = o["path"].get<std::string>();
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// commands

namespace detail {

inline std::vector<std::string> metadata(const std::string& command, const RunConfig& c) {
  return {std::string("psagen ") + kVersion, "command: " + command, "config: " + c.source.dump()};
}

inline std::vector<double> default_times(const RunConfig& c, double stop) {
  if (!c.times.empty()) return c.times;
  std::vector<double> t(400);
  for (int k = 0; k < 400; ++k) t[k] = stop * k / 399.0;
  return t;
}

/// Sweep values for the dynamics commands; without a sweep block the model's
/// own coarse graining is used once.
inline std::vector<std::pair<double, CoarseGraining>> coarse_grainings(const RunConfig& c) {
  std::vector<std::pair<double, CoarseGraining>> out;
  if (!c.sweep) {
    out.emplace_back(c.model.sinc(), c.model.coarse_graining);
    return out;
  }
  if (c.sweep->parameter == "temperature")
    throw ValidationError("this command sweeps 'sinc' or 'delta_t', not 'temperature'");
  for (double v : c.sweep->values) out.emplace_back(v, coarse_graining_for(c.sweep->parameter, v));
  return out;
}

inline std::string sweep_column(const RunConfig& c) { return c.sweep ? c.sweep->parameter : "sinc"; }

inline Matrix initial_state(const std::string& name) {
  if (name == "ground") return ground_state(2);
  if (name == "excited") {
    Matrix r = Matrix::Zero(2, 2);
    r(1, 1) = 1.0;
    return r;
  }
  return plus_state();
}

inline void require_system(const RunConfig& c, DipoleSystem s, const std::string& command) {
  if (c.model.system != s)
    throw ValidationError(command + " needs model.system = '" + to_string(s) + "'");
}

}  // namespace detail

/// Columns: q, omega_c, T, exact_threshold, simple_bound, sufficient_bound.
inline CsvTable cmd_threshold_sweep(const RunConfig& c, unsigned threads = 0) {
  if (!c.sweep || c.sweep->parameter != "temperature")
    throw ValidationError("threshold-sweep needs a sweep over 'temperature'");
  for (double t : c.sweep->values)
    if (!(t >= 0.0)) throw ValidationError("temperatures must be >= 0");
  const auto stats = c.statistics_series.empty() ? std::vector<Statistics>{c.model.statistics}
                                                 : c.statistics_series;
  const auto cutoffs = c.omega_c_series.empty() ? std::vector<double>{c.model.omega_c} : c.omega_c_series;
  struct Point {
    Statistics s;
    double omega_c, T;
  };
  std::vector<Point> points;
  for (auto s : stats)
    for (double wc : cutoffs)
      for (double t : c.sweep->values) points.push_back({s, wc, t});

  CsvTable table;
  table.metadata = detail::metadata("threshold-sweep", c);
  table.header = {"q", "omega_c", "T", "exact_threshold", "simple_bound", "sufficient_bound"};
  table.rows.resize(points.size());
  parallel_for(points.size(), threads, [&](std::size_t k) {
    DipoleModel m = c.model;
    m.statistics = points[k].s;
    m.omega_c = points[k].omega_c;
    m.beta = points[k].T == 0.0 ? kInf : 1.0 / points[k].T;
    const DipoleRates r = dipole_rates(m);
    table.rows[k] = {sign_of(m.statistics), m.omega_c, points[k].T, r.exact_threshold(),
                     r.simple_bound(), r.sufficient_bound()};
  });
  return table;
}

/// Columns: <sweep>, t, rho00, rho11, re_rho10, im_rho10, det, analytic_delta.
inline CsvTable cmd_evolve(const RunConfig& c, unsigned threads = 0) {
  detail::require_system(c, DipoleSystem::Qubit, "evolve");
  const auto cgs = detail::coarse_grainings(c);
  const auto times = detail::default_times(c, 10.0);
  const Matrix rho0 = detail::initial_state(c.initial_state);

  std::vector<std::vector<std::vector<double>>> blocks(cgs.size());
  parallel_for(cgs.size(), threads, [&](std::size_t k) {
    DipoleModel m = c.model;
    m.coarse_graining = cgs[k].second;
    const DipolePipeline p = build_dipole(m);
    Trajectory tr = evolve(p.liouvillian, rho0, times);
    add_qubit_observables(tr);
    const QubitParams qp = qubit_params(p);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double delta = c.initial_state == "plus"
                               ? max_abs_entry(tr.states[i] - qubit_analytic(qp, times[i]))
                               : std::nan("");
      blocks[k].push_back({cgs[k].first, times[i], tr.observables["rho00"][i], tr.observables["rho11"][i],
                           tr.observables["re_rho10"][i], tr.observables["im_rho10"][i],
                           tr.observables["det"][i], delta});
    }
  });
  CsvTable table;
  table.metadata = detail::metadata("evolve", c);
  table.metadata.push_back("initial_state: " + c.initial_state);
  table.header = {detail::sweep_column(c), "t", "rho00", "rho11", "re_rho10", "im_rho10", "det",
                  "analytic_delta"};
  for (auto& b : blocks)
    for (auto& r : b) table.rows.push_back(std::move(r));
  return table;
}

/// Columns: <sweep>, t, lambda1..lambda4 (ascending), lambda_analytic.
inline CsvTable cmd_choi(const RunConfig& c, unsigned threads = 0) {
  detail::require_system(c, DipoleSystem::Qubit, "choi");
  const auto cgs = detail::coarse_grainings(c);
  const auto times = detail::default_times(c, 10.0);

  std::vector<std::vector<std::vector<double>>> blocks(cgs.size());
  parallel_for(cgs.size(), threads, [&](std::size_t k) {
    DipoleModel m = c.model;
    m.coarse_graining = cgs[k].second;
    const DipolePipeline p = build_dipole(m);
    const ChoiTrajectory ch = choi_evolution(p.liouvillian, times);
    const QubitParams qp = qubit_params(p);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto& ev = ch.eigenvalues[i];
      blocks[k].push_back({cgs[k].first, times[i], ev(0), ev(1), ev(2), ev(3),
                           choi_eigenvalue_analytic(qp, times[i])});
    }
  });
  CsvTable table;
  table.metadata = detail::metadata("choi", c);
  table.header = {detail::sweep_column(c), "t", "lambda1", "lambda2", "lambda3", "lambda4",
                  "lambda_analytic"};
  for (auto& b : blocks)
    for (auto& r : b) table.rows.push_back(std::move(r));
  return table;
}

/// Columns: <sweep>, t, n, re_a2, im_a2, liouvillian_delta, n_b.
inline CsvTable cmd_qho(const RunConfig& c, unsigned threads = 0) {
  detail::require_system(c, DipoleSystem::Oscillator, "qho");
  const auto cgs = detail::coarse_grainings(c);
  const auto times = detail::default_times(c, 100.0);
  const double nb = occupation(c.model.beta, Statistics::Bosonic, c.model.omega0);

  std::vector<std::vector<std::vector<double>>> blocks(cgs.size());
  parallel_for(cgs.size(), threads, [&](std::size_t k) {
    DipoleModel m = c.model;
    m.coarse_graining = cgs[k].second;
    const DipolePipeline p = build_dipole(m);
    const QhoMoments mo = qho_moments(qho_params(p), Complex(0.0), 0.0, times);
    std::vector<double> delta(times.size(), std::nan(""));
    std::vector<double> tail(times.size(), std::nan(""));
    if (c.check_liouvillian) {
      const auto d = p.spec.dimension();
      const auto states = propagate(p.liouvillian, ground_state(d), times);
      if (tail_population(states) > kTailTolerance) {
        std::ostringstream os;
        os.precision(6);
        os << "top-level population " << tail_population(states) << " exceeds " << kTailTolerance
           << " at " << cgs[k].second.describe() << "; raise model.n_max";
        throw NumericalError(os.str());
      }
      const Matrix a = lowering_operator(m);
      const Matrix a2 = a * a, num = number_operator(d);
      for (std::size_t i = 0; i < times.size(); ++i) {
        delta[i] = std::max(std::abs((states[i] * num).trace().real() - mo.number[i]),
                            std::abs((states[i] * a2).trace() - mo.a2[i]));
        tail[i] = states[i](d - 1, d - 1).real();
      }
    }
    for (std::size_t i = 0; i < times.size(); ++i)
      blocks[k].push_back({cgs[k].first, times[i], mo.number[i], mo.a2[i].real(), mo.a2[i].imag(),
                           delta[i], tail[i], nb});
  });
  CsvTable table;
  table.metadata = detail::metadata("qho", c);
  table.header = {detail::sweep_column(c), "t", "n", "re_a2", "im_a2", "liouvillian_delta", "tail_population", "n_b"};
  for (auto& b : blocks)
    for (auto& r : b) table.rows.push_back(std::move(r));
  return table;
}

namespace detail {

inline ordered_json critical_times_json(const CriticalTimes& ct) {
  ordered_json j;
  j["trivial"] = ct.trivial;
  j["dtc0"] = number_or_inf(ct.dtc0);
  j["dtc1"] = number_or_inf(ct.dtc1);
  j["dtc2"] = number_or_inf(ct.dtc2);
  j["ordered"] = ct.dtc0 <= ct.dtc1 && ct.dtc1 <= ct.dtc2;
  ordered_json dil = ordered_json::array();
  for (const auto& r : ct.dilution) {
    ordered_json e;
    e["gap"] = r.gap;
    e["omega_norm"] = r.omega_norm;
    e["block_lambda_min"] = r.block_lambda_min;
    e["Q"] = number_or_inf(r.Q);
    e["K"] = number_or_inf(r.K);
    e["others"] = r.others;
    ordered_json q = ordered_json::array(), p = ordered_json::array();
    for (double x : r.q) q.push_back(number_or_inf(x));
    for (double x : r.p_optimal) p.push_back(number_or_inf(x));
    e["q"] = q;
    e["p_optimal"] = p;
    dil.push_back(e);
  }
  j["dilution"] = dil;
  return j;
}

inline ordered_json gamma_check(const OmegaProvider& omega, const CoarseGraining& cg) {
  const Matrix g = coarse_grained_gamma(omega, cg);
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(g), Eigen::EigenvaluesOnly);
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  ordered_json j;
  j["lambda_min"] = es.eigenvalues()(0);
  j["scale"] = scale;
  j["psd"] = es.eigenvalues()(0) >= -1e-10 * scale;
  return j;
}

}  // namespace detail

/// JSON report: Lambda_min at the configured coarse graining, critical times
/// with dilution data, and the sufficiency check at every finite dtc.
inline std::string cmd_certify(const RunConfig& c, unsigned threads = 0) {
  (void)threads;
  ordered_json rep;
  rep["schema_version"] = kReportSchemaVersion;
  rep["generator"] = std::string("psagen ") + kVersion;
  rep["command"] = "certify";

  OmegaProvider omega;
  CoarseGraining cg = c.model.coarse_graining;
  if (c.omega_set) {
    omega = *c.omega_set;
    rep["source"] = "omega_set";
    if (cg.injected_sinc()) check_uniform_sinc_applicable(omega.gaps());
  } else {
    const DipoleModel& m = c.model;
    m.validate();
    const BathSpec bath = m.bath();
    const DipolePvTerms pv = dipole_pv_terms(bath, m.omega0, m.quadrature);
    omega = dipole_omega(bath, m.omega0, pv);
    const DipoleRates r = dipole_rates(bath, m.omega0, pv);
    rep["source"] = "dipole";
    ordered_json d;
    d["statistics"] = to_string(m.statistics);
    d["omega0"] = m.omega0;
    d["beta"] = number_or_inf(m.beta);
    d["kappa0"] = m.kappa0;
    d["omega_c"] = m.omega_c;
    d["I"] = pv.I;
    d["I_minus"] = pv.I_minus;
    d["I_plus"] = pv.I_plus;
    d["sinc"] = m.sinc();
    d["exact_threshold"] = r.exact_threshold();
    d["simple_bound"] = r.simple_bound();
    d["sufficient_bound"] = r.sufficient_bound();
    rep["dipole"] = d;
  }
  rep["coarse_graining"] = cg.describe();

  const auto check = detail::gamma_check(omega, cg);
  rep["lambda_min"] = check["lambda_min"];
  rep["is_cp"] = check["psd"];

  const auto gaps = omega.gaps();
  const CriticalTimes ct = critical_times(omega, gaps);
  rep["critical_times"] = detail::critical_times_json(ct);

  ordered_json suff = ordered_json::array();
  if (!ct.trivial) {
    const auto optimal = optimal_probabilities(ct);
    const auto flat = flat_probabilities(gaps.size());
    const std::pair<const char*, double> ks[] = {{"dtc0", ct.dtc0}, {"dtc1", ct.dtc1}, {"dtc2", ct.dtc2}};
    for (const auto& [name, dt] : ks) {
      ordered_json e;
      e["label"] = name;
      e["delta_t"] = number_or_inf(dt);
      const bool use_optimal = std::string(name) == "dtc0";
      e["probabilities"] = use_optimal ? "optimal" : "flat";
      e["dilution_verified"] = verify_dilution(omega, gaps, use_optimal ? optimal : flat, dt);
      const auto g = detail::gamma_check(omega, CoarseGraining::time(dt));
      e["lambda_min"] = g["lambda_min"];
      e["scale"] = g["scale"];
      e["psd"] = g["psd"];
      suff.push_back(e);
    }
  }
  rep["sufficiency"] = suff;

  if (!c.scan_delta_t.empty()) {
    ordered_json scan = ordered_json::array();
    for (double dt : c.scan_delta_t) {
      auto g = detail::gamma_check(omega, CoarseGraining::time(dt));
      ordered_json e;
      e["delta_t"] = number_or_inf(dt);
      e["lambda_min"] = g["lambda_min"];
      e["psd"] = g["psd"];
      scan.push_back(e);
    }
    rep["scan"] = scan;
  }
  return rep.dump(2) + "\n";
}

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"threshold-sweep", "evolve", "choi", "qho", "certify"};
  return names;
}

/// Dispatch by command name; returns the text to write.
inline std::string run_command(const std::string& command, const RunConfig& c, unsigned threads = 0) {
  if (command == "threshold-sweep") return cmd_threshold_sweep(c, threads).str();
  if (command == "evolve") return cmd_evolve(c, threads).str();
  if (command == "choi") return cmd_choi(c, threads).str();
  if (command == "qho") return cmd_qho(c, threads).str();
  if (command == "certify") return cmd_certify(c, threads);
  throw ValidationError("unknown command '" + command + "'");
}

/// Exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ConfigurationError*>(&e) ||
      dynamic_cast<const nlohmann::json::exception*>(&e))
    return kValidation;
  if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
  return kFailure;
}

}  // namespace psa::cli
