#include "deficient/artifacts.hpp"
#include "deficient/config.hpp"
#include "deficient/scenario.hpp"

#include <doctest.h>
#include <json.hpp>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace deficient;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = DEFICIENT_SCENARIO_DIR;
const std::string kCli = DEFICIENT_CLI;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("deficient_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Exec {
  int code;
  std::string out;
  std::string err;
};

Exec cli(const std::string& args, const fs::path& logs) {
  fs::create_directories(logs);
  const std::string cmd =
      kCli + " " + args + " > " + (logs / "stdout").string() + " 2> " + (logs / "stderr").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(logs / "stdout"), slurp(logs / "stderr")};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::istringstream fields(line);
    std::string f;
    while (std::getline(fields, f, ',')) row.push_back(f);
    rows.push_back(row);
  }
  return rows;
}

constexpr const char* kMinimal = R"(
[scenario]
name = free
d = 2
[sampler]
family = lattice
n = 16
)";

} // namespace

TEST_CASE("minimal config fills defaults") {
  const ScenarioConfig cfg = parse_config(kMinimal);
  CHECK(cfg.name == "free");
  CHECK(cfg.d == 2);
  CHECK(cfg.kernel.family == "none");
  CHECK(cfg.potential.family == "zero");
  CHECK(cfg.bounding.family == "none");
  CHECK(cfg.sampler.family == SamplerFamily::Lattice);
  CHECK(cfg.sampler.n == 16);
  CHECK(cfg.flow.ode_tol == 1e-9);
  CHECK(cfg.flow.x_max == 1e6);
  CHECK(cfg.flow.n == 1);
  CHECK(cfg.outputs.formats == std::vector<std::string>{"csv", "json"});
  const Measure mu = initial_measure(cfg);
  CHECK(total_mass(mu, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("grammar") {
  const ScenarioConfig cfg = parse_config(R"(
# leading comment
[scenario]
name = "two words"   # trailing comment
d = 1
[flow]
epsilons = [0.4, 0.2,0.1]
ns = [ 8, 16 ]
T = 2
n = 8
[outputs]
formats = [csv]
)");
  CHECK(cfg.name == "two words");
  CHECK(cfg.flow.epsilons == std::vector<double>{0.4, 0.2, 0.1});
  CHECK(cfg.flow.ns == std::vector<long>{8, 16});
  CHECK(cfg.outputs.formats == std::vector<std::string>{"csv"});
}

TEST_CASE("parse errors carry the line") {
  try {
    parse_config("[scenario]\nname = x\nthis line has no equals sign\n", "cfg");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("cfg:3") == 0);
  }
  CHECK_THROWS_AS(parse_config("key = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[flow\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[flow]\nepsilons = [0.1, 0.2\n"), ParseError);
}

TEST_CASE("validation collects every issue with its field path") {
  try {
    parse_config(R"(
[flow]
n = 0
epsilons = [0.1, 0.1]
T = -1
[kernel]
family = gaussian
bogus = 3
)");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const auto& issues = e.issues();
    auto has = [&](const std::string& needle) {
      for (const auto& s : issues)
        if (s.find(needle) != std::string::npos) return true;
      return false;
    };
    CHECK(has("flow.n"));
    CHECK(has("not strictly decreasing"));
    CHECK(has("flow.T"));
    CHECK(has("kernel.family"));
    CHECK(has("kernel.bogus"));
    CHECK(issues.size() >= 5);
  }
}

TEST_CASE("duplicate keys and off-grid probe times are rejected") {
  CHECK_THROWS_AS(parse_config("[flow]\nn = 2\nn = 3\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("[flow]\nT = 1\nn = 4\n[probes]\ntimes = [0.3]\n"), ValidationError);
}

TEST_CASE("shipped scenarios validate") {
  for (const char* name : {"free-decay", "harmonic-confined", "quartic-blow-up", "interacting-bump"}) {
    CAPTURE(name);
    const ScenarioConfig cfg = load_config(kScenarios / (std::string(name) + ".cfg"));
    CHECK(cfg.name == name);
  }
  CHECK_THROWS(load_config(kScenarios / "no-such-file.cfg"));
}

TEST_CASE("shortest round-trip decimals") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("cli: validate") {
  const fs::path logs = scratch("validate");
  CHECK(cli("validate " + (kScenarios / "free-decay.cfg").string(), logs).code == 0);
  const fs::path bad = logs / "bad.cfg";
  std::ofstream(bad) << "[flow]\nn = 0\n";
  const Exec r = cli("validate " + bad.string(), logs);
  CHECK(r.code == 2);
  const auto report = nlohmann::json::parse(r.err);
  CHECK(report["kind"] == "ValidationError");
  CHECK(report["issues"][0].get<std::string>().find("flow.n") != std::string::npos);
}

TEST_CASE("cli: harmonic run keeps its mass and creates the output directory") {
  const fs::path out = scratch("harmonic") / "nested" / "dir";
  const Exec r = cli("run " + (kScenarios / "harmonic-confined.cfg").string() + " --out " + out.string(),
                     scratch("harmonic-logs"));
  CHECK(r.code == 0);
  CHECK(r.out.find("audits     pass") != std::string::npos);
  const auto rows = read_csv(out / "run.csv");
  REQUIRE(rows.size() == 202);
  CHECK(rows[0][1] == "mass");
  CHECK(std::abs(std::stod(rows[1][1]) - 1) <= 1e-14);
  for (std::size_t k = 2; k < rows.size(); ++k) CHECK(rows[k][1] == rows[1][1]);
  CHECK(fs::exists(out / "certificates.json"));
  CHECK(fs::exists(out / "snapshot_200.csv"));
  CHECK(cli("audit " + out.string(), scratch("harmonic-audit")).code == 0);
}

TEST_CASE("cli: blow-up sweep loses mass after the first escape") {
  const fs::path out = scratch("quartic");
  const Exec r = cli("sweep " + (kScenarios / "quartic-blow-up.cfg").string() + " --out " + out.string(),
                     scratch("quartic-logs"));
  CHECK(r.code == 0);
  const auto rows = read_csv(out / "sweep.csv");
  REQUIRE(rows.size() >= 4);
  for (std::size_t col = 1; col + 3 < rows[0].size(); ++col) {
    for (std::size_t k = 2; k < rows.size(); ++k) CHECK(std::stod(rows[k][col]) < std::stod(rows[k - 1][col]));
  }
  CHECK(cli("audit " + out.string(), scratch("quartic-audit")).code == 0);
}

TEST_CASE("cli: unwritable output is an IOError") {
  const fs::path base = scratch("readonly");
  fs::create_directories(base);
  const fs::path file = base / "plain-file";
  std::ofstream(file) << "x";
  const Exec r = cli("run " + (kScenarios / "free-decay.cfg").string() + " --out " + (file / "sub").string(),
                     scratch("readonly-logs"));
  CHECK(r.code == 3);
  CHECK(nlohmann::json::parse(r.err)["kind"] == "IOError");

  if (::geteuid() != 0) {
    const fs::path locked = base / "locked";
    fs::create_directories(locked);
    fs::permissions(locked, fs::perms::owner_read | fs::perms::owner_exec);
    const Exec r2 = cli("run " + (kScenarios / "free-decay.cfg").string() + " --out " + (locked / "x").string(),
                        scratch("locked-logs"));
    CHECK(r2.code == 3);
    fs::permissions(locked, fs::perms::owner_all);
  }
}

TEST_CASE("cli: audit notices a tampered mass column") {
  const fs::path out = scratch("tamper");
  REQUIRE(cli("run " + (kScenarios / "free-decay.cfg").string() + " --out " + out.string(), scratch("tamper-logs")).code == 0);
  auto rows = read_csv(out / "run.csv");
  rows[5][1] = "2";
  std::ofstream csv(out / "run.csv");
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) csv << (k ? "," : "") << row[k];
    csv << "\n";
  }
  csv.close();
  CHECK(cli("audit " + out.string(), scratch("tamper-audit")).code == 1);
}

TEST_CASE("cli: seed override and threads leave artifacts deterministic") {
  const auto cfg = (kScenarios / "interacting-bump.cfg").string();
  const fs::path a = scratch("det-a"), b = scratch("det-b"), c = scratch("det-c");
  REQUIRE(cli("run " + cfg + " --out " + a.string(), scratch("det-logs")).code == 0);
  REQUIRE(cli("run " + cfg + " --threads 3 --out " + b.string(), scratch("det-logs")).code == 0);
  REQUIRE(cli("run " + cfg + " --seed 7 --out " + c.string(), scratch("det-logs")).code == 0);
  CHECK(slurp(a / "run.csv") == slurp(b / "run.csv"));
  CHECK(slurp(a / "snapshot_64.csv") == slurp(b / "snapshot_64.csv"));
  CHECK(slurp(a / "run.csv") != slurp(c / "run.csv"));
}
