#include "mlirt/commands.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace mlirt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mlirt_cmd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Small two-class design with r items and 40 schools.
fs::path small_design(const fs::path& dir, int r, int schools = 40) {
  std::ostringstream beta;
  for (int j = 0; j < r; ++j) beta << (j ? ", " : "") << -1.0 + 2.0 * j / (r - 1);
  const fs::path p = dir / ("design" + std::to_string(r) + ".json");
  std::ofstream(p) << R"({"kv": 2, "ku": 2, "items": )" << r
                   << R"(, "parameterization": "2pl",
    "student_covariates": [{"name": "gender", "type": "categorical", "levels": ["M", "F"]}],
    "school_covariates": [{"name": "area", "type": "categorical", "levels": ["A", "B"]}],
    "schools": )" << schools
                   << R"(, "group_size": 10, "seed": 1,
    "truth": {"xi": [[-1.2], [1.2]], "beta": [)"
                   << beta.str() << R"(], "zeta0_v": [[-1], [1]], "zeta1_v": [[0.5]], "zeta1_u": [[0.5]]}})";
  return p;
}

int cli(const std::string& args) {
  const int status = std::system((std::string(MLIRT_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

struct Streams {
  std::ostringstream log, err;
};

CommandOptions fit_options(const fs::path& data, const fs::path& out) {
  CommandOptions o;
  o.students = data / "students.csv";
  o.schools = data / "schools.csv";
  o.config = data / "config.json";
  o.out = out;
  o.starts = 2;
  return o;
}

}  // namespace

TEST_CASE("parse_ku_values") {
  CHECK(parse_ku_values("3") == std::vector<std::size_t>{3});
  CHECK(parse_ku_values("1..4") == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK_THROWS_AS(parse_ku_values("4..1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_ku_values("x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_ku_values("0"), std::invalid_argument);
}

TEST_CASE("simulate writes the desk design deterministically") {
  const auto dir = scratch("sim");
  CHECK(cli("simulate --seed 5 --out " + (dir / "a").string()) == 0);
  CHECK(cli("simulate --seed 5 --out " + (dir / "b").string()) == 0);
  CHECK(count_lines(dir / "a" / "students.csv") == 4001);
  for (const char* f : {"students.csv", "schools.csv", "config.json", "truth.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  CHECK(cli("simulate --config " + (dir / "nope.json").string() + " --out " + dir.string()) == 1);
}

TEST_CASE("fit, classify and sweep end to end") {
  const auto dir = scratch("fit");
  const auto design = small_design(dir, 8);
  Streams s;
  CommandOptions sim;
  sim.config = design;
  sim.out = dir / "data";
  REQUIRE(run_simulate(sim, s.log, s.err) == kExitOk);

  const auto opts = fit_options(dir / "data", dir / "fit2pl");
  REQUIRE(run_fit(opts, s.log, s.err) == kExitOk);
  const FitReport rep = read_fit_report(dir / "fit2pl" / "report.json");
  CHECK(rep.converged);
  for (std::size_t t = 1; t < rep.trace.size(); ++t) CHECK(rep.trace[t] >= rep.trace[t - 1] - 1e-8);
  CHECK(count_lines(dir / "fit2pl" / "student_classes.csv") == 401);
  CHECK(count_lines(dir / "fit2pl" / "school_types.csv") == 41);

  auto one = opts;
  one.out = dir / "fit1pl";
  one.parameterization = "1pl";
  REQUIRE(run_fit(one, s.log, s.err) == kExitOk);
  const FitReport rep1 = read_fit_report(dir / "fit1pl" / "report.json");
  CHECK(rep.n_par - rep1.n_par == 8 - 1);

  SUBCASE("classify reproduces the fit assignments") {
    CommandOptions c;
    c.report = dir / "fit2pl" / "report.json";
    c.students = opts.students;
    c.schools = opts.schools;
    c.out = dir / "cls";
    REQUIRE(run_classify(c, s.log, s.err) == kExitOk);
    CHECK(slurp(dir / "cls" / "student_classes.csv") == slurp(dir / "fit2pl" / "student_classes.csv"));
    CHECK(slurp(dir / "cls" / "school_types.csv") == slurp(dir / "fit2pl" / "school_types.csv"));
  }
  SUBCASE("classify a dataset with an extra school") {
    const auto extra = dir / "extra";
    fs::create_directories(extra);
    std::ofstream(extra / "schools.csv") << slurp(dir / "data" / "schools.csv") << "X9,B\n";
    std::ofstream(extra / "students.csv") << slurp(dir / "data" / "students.csv")
                                           << "X9,P01,1,1,1,0,0,1,NA,0,F\n";
    CommandOptions c;
    c.report = dir / "fit2pl" / "report.json";
    c.students = extra / "students.csv";
    c.schools = extra / "schools.csv";
    c.out = extra / "out";
    REQUIRE(run_classify(c, s.log, s.err) == kExitOk);
    CHECK(count_lines(extra / "out" / "school_types.csv") == 42);
  }
  SUBCASE("classify rejects a dataset with fewer items") {
    const auto other = small_design(dir, 7);
    CommandOptions sim7;
    sim7.config = other;
    sim7.out = dir / "data7";
    REQUIRE(run_simulate(sim7, s.log, s.err) == kExitOk);
    CommandOptions c;
    c.report = dir / "fit2pl" / "report.json";
    c.students = dir / "data7" / "students.csv";
    c.schools = dir / "data7" / "schools.csv";
    c.out = dir / "cls7";
    std::ostringstream err;
    CHECK(run_classify(c, s.log, err) == kExitInputError);
    CHECK(err.str().find("spec mismatch") != std::string::npos);
  }
  SUBCASE("sweep") {
    auto sw = opts;
    sw.out = dir / "sweep";
    sw.ku = "1..3";
    sw.starts = 1;
    const int code = run_sweep(sw, s.log, s.err);
    CHECK((code == kExitOk || code == kExitNotConverged));
    const std::string csv = slurp(dir / "sweep" / "sweep.csv");
    CHECK(csv.rfind("k_u,loglik,n_par,bic,converged,chosen\n", 0) == 0);
    CHECK(fs::exists(dir / "sweep" / "report.json"));
    sw.ku = "2";
    sw.out = dir / "sweep1";
    run_sweep(sw, s.log, s.err);
    CHECK(slurp(dir / "sweep1" / "sweep.csv").find("\n2,") != std::string::npos);
  }
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  const auto design = small_design(dir, 6, 10);
  CHECK(cli("simulate --config " + design.string() + " --out " + (dir / "d").string()) == 0);
  const std::string base = "--students " + (dir / "d" / "students.csv").string() + " --config " +
                           (dir / "d" / "config.json").string() + " --out " + (dir / "o").string();
  std::ostringstream log, err;
  CommandOptions o = fit_options(dir / "d", dir / "o");
  o.schools = dir / "d" / "absent.csv";
  CHECK(run_fit(o, log, err) == kExitInputError);
  CHECK(err.str().find("absent.csv") != std::string::npos);
  CHECK(cli("fit " + base + " --schools " + (dir / "d" / "absent.csv").string()) == 1);
  CHECK(cli("fit " + base + " --schools " + (dir / "d" / "schools.csv").string() +
            " --max-iter 1 --starts 1") == 2);
  CHECK(fs::exists(dir / "o" / "report.json"));
  CHECK(cli("fit " + base + " --schools " + (dir / "d" / "schools.csv").string() +
            " --parameterization 4pl") == 1);
  CHECK(cli("bogus") == 1);
}
