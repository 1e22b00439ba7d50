#include "psa/cli.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace psa;
using namespace psa::cli;
namespace fs = std::filesystem;

namespace {

const json kQubitModel = json::parse(R"({"system": "qubit", "statistics": "bosonic", "omega0": 1.0,
  "temperature": 0.5, "kappa0": 2.0, "omega_c": 5.0})");

RunConfig config_from(const std::string& text) { return parse_config(json::parse(text)); }

/// Data rows of a CSV text (metadata and header skipped), split on commas.
std::vector<std::vector<double>> data_rows(const std::string& csv, std::vector<std::string>* header = nullptr) {
  std::istringstream in(csv);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!seen_header) {
      seen_header = true;
      if (header) *header = cells;
      continue;
    }
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(std::stod(c));
    rows.push_back(std::move(r));
  }
  return rows;
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "psagen_cli_tests";
  fs::create_directories(p);
  return p;
}

int run_psagen(const std::string& args) {
  const std::string cmd = std::string(PSAGEN_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, NumberFormatting) {
  EXPECT_EQ(format_number(0.1234567890123456), "0.123456789012");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1e-20), "1e-20");
  EXPECT_EQ(format_number(kInf), "inf");
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Cli, Grids) {
  const auto lin = psa::cli::detail::parse_grid(json::parse(R"({"start": 0, "stop": 1, "count": 5})"), "g");
  EXPECT_EQ(lin, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  const auto lg = psa::cli::detail::parse_grid(json::parse(R"({"start": 0.01, "stop": 100, "count": 5, "spacing": "log"})"), "g");
  EXPECT_NEAR(lg[2], 1.0, 1e-14);
  EXPECT_EQ(lg.back(), 100.0);
  EXPECT_THROW(psa::cli::detail::parse_grid(json::parse("[]"), "g"), ValidationError);
  EXPECT_THROW(psa::cli::detail::parse_grid(json::parse("[1, 1]"), "g"), ValidationError);
  EXPECT_THROW(psa::cli::detail::parse_grid(json::parse("[2, 1]"), "g"), ValidationError);
  EXPECT_THROW(psa::cli::detail::parse_grid(json::parse(R"({"start": 0, "stop": 1, "count": 0})"), "g"), ValidationError);
  EXPECT_THROW(psa::cli::detail::parse_grid(json::parse(R"({"start": 0, "stop": 1, "count": 3, "spacing": "log"})"), "g"),
               ValidationError);
}

TEST(Cli, ConfigValidation) {
  EXPECT_THROW(config_from(R"({"modle": {}})"), ValidationError);
  EXPECT_THROW(config_from(R"({"model": {"temperature": 1, "beta": 1}})"), ValidationError);
  EXPECT_THROW(config_from(R"({"model": {"system": "qutrit"}})"), ValidationError);
  EXPECT_THROW(config_from(R"({"model": {"coarse_graining": {"sinc": 0.5, "delta_t": 1}}})"), ValidationError);
  EXPECT_THROW(config_from(R"({"model": {"coarse_graining": {"sinc": 2}}})"), ValidationError);
  EXPECT_THROW(config_from(R"({"sweep": {"parameter": "kappa0", "grid": [1]}})"), ValidationError);
  EXPECT_THROW(config_from(R"({"omega_set": {"gaps": [1], "omega": [[[-1]]]}})"), ValidationError);
  const auto c = config_from(R"({"model": {"temperature": 0, "coarse_graining": "redfield"}})");
  EXPECT_TRUE(std::isinf(c.model.beta));
  EXPECT_EQ(c.model.coarse_graining.delta_t(), 0.0);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ValidationError);
}

TEST(Cli, ThresholdSweepIsDeterministicAcrossThreadCounts) {
  const auto c = config_from(R"({
    "model": {"omega0": 1.0, "kappa0": 2.0, "omega_c": 10.0},
    "series": {"statistics": ["bosonic", "fermionic"], "omega_c": [10, 20]},
    "sweep": {"parameter": "temperature", "grid": {"start": 0.05, "stop": 10, "count": 6, "spacing": "log"}}})");
  const std::string one = cmd_threshold_sweep(c, 1).str();
  const std::string many = cmd_threshold_sweep(c, 3).str();
  EXPECT_EQ(one, many);
  std::vector<std::string> header;
  const auto rows = data_rows(one, &header);
  ASSERT_EQ(rows.size(), 24u);
  EXPECT_EQ(header, (std::vector<std::string>{"q", "omega_c", "T", "exact_threshold", "simple_bound",
                                              "sufficient_bound"}));
  for (const auto& r : rows) {
    EXPECT_LE(r[3], r[4] + 1e-10);
    EXPECT_LE(r[5], r[3] + 1e-10);
  }
  EXPECT_EQ(rows.front()[0], 1.0);
  EXPECT_EQ(rows.back()[0], -1.0);
  EXPECT_LT(rows.front()[3], 0.05);  // low temperature: threshold near zero
}

TEST(Cli, EvolveRows) {
  json j;
  j["model"] = kQubitModel;
  j["sweep"] = json::parse(R"({"parameter": "sinc", "grid": [0.0, 0.628, 1.0]})");
  j["times"] = json::parse(R"({"start": 0, "stop": 10, "count": 41})");
  const auto rows = data_rows(cmd_evolve(parse_config(j)).str());
  ASSERT_EQ(rows.size(), 123u);
  // t = 0 row is |+><+|
  EXPECT_EQ(rows[0][1], 0.0);
  EXPECT_NEAR(rows[0][2], 0.5, 1e-12);
  EXPECT_NEAR(rows[0][4], 0.5, 1e-12);
  EXPECT_NEAR(rows[0][6], 0.0, 1e-12);
  for (const auto& r : rows) EXPECT_LT(r[7], 1e-8);
}

TEST(Cli, ChoiRows) {
  json j;
  j["model"] = kQubitModel;
  j["sweep"] = json::parse(R"({"parameter": "sinc", "grid": [0.621, 0.634]})");
  j["times"] = json::parse(R"({"start": 0, "stop": 2, "count": 21})");
  const auto rows = data_rows(cmd_choi(parse_config(j)).str());
  ASSERT_EQ(rows.size(), 42u);
  EXPECT_NEAR(rows[0][5], 1.0, 1e-12);
  EXPECT_NEAR(rows[0][2], 0.0, 1e-12);
  double min_below = 1.0, min_above = 1.0;
  for (const auto& r : rows) (r[0] < 0.628 ? min_below : min_above) = std::min(r[0] < 0.628 ? min_below : min_above, r[2]);
  EXPECT_GE(min_below, -1e-12);
  EXPECT_LT(min_above, 0.0);
}

TEST(Cli, QhoRows) {
  json j;
  j["model"] = kQubitModel;
  j["model"]["system"] = "oscillator";
  j["model"]["kappa0"] = 0.1;
  j["model"]["n_max"] = 30;
  j["sweep"] = json::parse(R"({"parameter": "sinc", "grid": [0.628]})");
  j["times"] = json::parse(R"({"start": 0, "stop": 20, "count": 11})");
  const auto rows = data_rows(cmd_qho(parse_config(j)).str());
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0][2], 0.0);
  EXPECT_EQ(rows[0][3], 0.0);
  for (const auto& r : rows) {
    EXPECT_LT(r[5], 1e-6);
    EXPECT_LT(r[6], 1e-10);
  }
}

TEST(Cli, QhoRejectsShortLadder) {
  json j;
  j["model"] = kQubitModel;
  j["model"]["system"] = "oscillator";
  j["model"]["kappa0"] = 0.1;
  j["model"]["n_max"] = 4;
  j["sweep"] = json::parse(R"({"parameter": "sinc", "grid": [0.0]})");
  j["times"] = json::parse(R"({"start": 0, "stop": 50, "count": 3})");
  j["options"] = json::parse(R"({"check_liouvillian": true})");
  EXPECT_THROW(cmd_qho(parse_config(j)), NumericalError);
}

TEST(Cli, CommandsRejectWrongSystem) {
  json j;
  j["model"] = kQubitModel;
  EXPECT_THROW(cmd_qho(parse_config(j)), ValidationError);
  j["model"]["system"] = "oscillator";
  EXPECT_THROW(cmd_evolve(parse_config(j)), ValidationError);
  EXPECT_THROW(cmd_threshold_sweep(parse_config(j)), ValidationError);
}

TEST(Cli, CertifyDipoleReport) {
  json j;
  j["model"] = kQubitModel;
  j["model"]["coarse_graining"] = json::parse(R"({"sinc": 0.628})");
  const json rep = json::parse(cmd_certify(parse_config(j)));
  EXPECT_EQ(rep["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(rep["source"], "dipole");
  EXPECT_NEAR(rep["dipole"]["exact_threshold"].get<double>(), 0.628, 0.005);
  EXPECT_TRUE(rep["critical_times"]["ordered"].get<bool>());
  ASSERT_EQ(rep["sufficiency"].size(), 3u);
  for (const auto& s : rep["sufficiency"]) {
    EXPECT_TRUE(s["psd"].get<bool>());
    EXPECT_TRUE(s["dilution_verified"].get<bool>());
  }
}

TEST(Cli, CertifySingleGapIsTrivial) {
  const auto c = config_from(R"({"model": {"coarse_graining": "redfield"},
    "omega_set": {"gaps": [1.0], "omega": [[[[0.5, 0.2]]]]}})");
  const json rep = json::parse(cmd_certify(c));
  EXPECT_TRUE(rep["critical_times"]["trivial"].get<bool>());
  EXPECT_TRUE(rep["is_cp"].get<bool>());
  EXPECT_TRUE(rep["sufficiency"].empty());
}

TEST(Cli, ShippedConfigsRunAndAreDeterministic) {
  const fs::path dir = scratch_dir();
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(PSA_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const std::string name = entry.path().stem().string();
    std::string command;
    if (name.rfind("threshold", 0) == 0) command = "threshold-sweep";
    else if (name.rfind("qubit", 0) == 0) command = "evolve";
    else if (name.rfind("choi", 0) == 0) command = "choi";
    else if (name.rfind("qho", 0) == 0) command = "qho";
    else if (name.rfind("certify", 0) == 0) command = "certify";
    ASSERT_FALSE(command.empty()) << name;
    const fs::path a = dir / (name + ".a"), b = dir / (name + ".b");
    EXPECT_EQ(run_psagen(command + " --config " + entry.path().string() + " --out " + a.string()), 0) << name;
    if (command != "qho") {
      EXPECT_EQ(run_psagen(command + " --config " + entry.path().string() + " --out " + b.string() +
                           " --threads 2"), 0) << name;
      EXPECT_EQ(read_file(a), read_file(b)) << name;
    }
    ++count;
  }
  EXPECT_GE(count, 8u);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir();
  auto write = [&](const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p.string();
  };
  EXPECT_EQ(run_psagen("certify --config /nonexistent.json"), kValidation);
  EXPECT_EQ(run_psagen("certify --config " + write("bad_key.json", R"({"modle": {}})")), kValidation);
  EXPECT_EQ(run_psagen("certify --config " + write("bad_json.json", "{")), kValidation);
  EXPECT_EQ(run_psagen("frobnicate --config x.json"), kValidation);
  EXPECT_EQ(run_psagen("certify"), kValidation);
  EXPECT_EQ(run_psagen("certify --config " + write("tol.json", R"({"model": {"quadrature_rel_tol": 1e-30}})")),
            kValidation);
  // omega0 outside the bath support fails inside the rate evaluation
  const std::string outside = write("outside.json", R"({"model": {"temperature": 0.5, "integration_cutoff": 0.5}})");
  EXPECT_EQ(run_psagen("certify --config " + outside), kNumerical);
  const std::string ok = write("ok.json", R"({"model": {"temperature": 0.5, "coarse_graining": {"sinc": 0.3}}})");
  const fs::path out = dir / "ok_report.json";
  fs::remove(out);
  EXPECT_EQ(run_psagen("certify --config " + ok + " --out " + out.string()), kSuccess);
  EXPECT_TRUE(json::parse(read_file(out))["is_cp"].get<bool>());
}
