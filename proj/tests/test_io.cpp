#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "ivqr/io.hpp"

using namespace ivqr;
namespace fs = std::filesystem;

namespace {

ColumnMapping yzw() { return ColumnMapping{"y", {"z"}, {"w"}, {}}; }

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ivqr_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IVQR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream f(p);
  return nlohmann::json::parse(f);
}

}  // namespace

TEST_CASE("csv ingestion") {
  std::istringstream three("y,z,w\n1,0.1,0.2\n2,0.3,0.4\n3,0.5,0.6\n");
  const auto r = read_csv(three, yzw());
  CHECK(r.sample.size() == 3);
  CHECK(r.dropped == 0);
  CHECK(r.sample.z(2, 0) == 0.5);

  std::istringstream bad("y,z,w,other\n1,0.1,0.2,x\n2,abc,0.4,1\n3,0.5,0.6,\n4,,0.1,2\n");
  const auto b = read_csv(bad, yzw());
  CHECK(b.sample.size() == 2);
  CHECK(b.dropped == 2);

  std::istringstream one_bad("y,z,w\n1,0.1,0.2\nfoo,0.3,0.4\n3,0.5,0.6\n");
  CHECK(read_csv(one_bad, yzw()).dropped == 1);

  std::istringstream missing("y,z\n1,2\n");
  CHECK_THROWS_WITH(read_csv(missing, yzw()), doctest::Contains("'w'"));
  std::istringstream empty_rows("y,z,w\na,b,c\n");
  CHECK_THROWS(read_csv(empty_rows, yzw()));
  std::istringstream nothing("");
  CHECK_THROWS(read_csv(nothing, yzw()));
  CHECK_THROWS(ingest_csv("/nonexistent/file.csv", yzw()));
}

TEST_CASE("school-style column mapping") {
  std::istringstream data("score,classsize,maimonides,disadv,extra\n70.5,31,30.5,12,1\n68,40,40,3,2\n");
  const ColumnMapping m{"score", {"classsize"}, {"maimonides"}, {"disadv"}};
  const auto r = read_csv(data, m);
  CHECK(r.sample.size() == 2);
  CHECK(r.sample.has_d());
  CHECK(r.sample.d(0, 0) == 12);
  CHECK(r.sample.y[1] == 68);
}

TEST_CASE("csv round trip is exact") {
  const Sample s = gen_sample(DgpSpec::make(Design::additive_null, 1, 200, 6));
  Sample with_d = s;
  with_d.d = s.w.col(0) * 3.0 + Eigen::VectorXd::Constant(200, 1.0 / 3.0);
  const auto mapping = default_mapping(with_d);
  std::stringstream io;
  write_csv(io, with_d, mapping);
  const auto back = read_csv(io, mapping);
  CHECK(back.dropped == 0);
  CHECK(back.sample.y == with_d.y);
  CHECK(back.sample.z == with_d.z);
  CHECK(back.sample.w == with_d.w);
  CHECK(back.sample.d == with_d.d);
  ColumnMapping wrong = mapping;
  wrong.z.pop_back();
  CHECK_THROWS(write_csv(io, with_d, wrong));
}

TEST_CASE("json reports") {
  TestResult r = decide("specification", 3.5, standardize_Sn(3.5, 20), 0.05, normal_critical_value(0.05),
                        CriticalSource::asymptotic_normal);
  r.k_n = 4;
  r.l_n = 8;
  r.m_n = 20;
  r.grid = make_uniform_grid(20);
  const auto j = nlohmann::json::parse(to_json(r).dump());
  const auto back = test_result_from_json(j);
  CHECK(back.raw == r.raw);
  CHECK(back.standardized == r.standardized);
  CHECK(back.critical_value == r.critical_value);
  CHECK(back.grid.points == r.grid.points);
  CHECK(decision_from_json(j) == r.reject);

  const auto always = decide("x", 1.0, -5.0, 1.0, normal_critical_value(1.0), CriticalSource::asymptotic_normal);
  const auto ja = nlohmann::json::parse(to_json(always).dump());
  CHECK(ja["critical_value"] == "-inf");
  CHECK(decision_from_json(ja));
  CHECK(std::isinf(test_result_from_json(ja).critical_value));

  SelectionResult sel = reduce_minmax({{1, 4, 0.5}, {2, 4, 0.25}});
  const auto js = to_json(sel);
  CHECK(js["chosen_k"] == 2);
  CHECK(js["table"].size() == 2);
}

TEST_CASE("command line") {
  const auto dir = scratch_dir("cli");
  const auto csv = (dir / "null.csv").string();
  REQUIRE(run_cli("generate --design null --n 500 --seed 11 --out " + csv) == 0);
  const auto sample = ingest_csv(csv, ColumnMapping{"y", {"z1"}, {"w1"}, {}});
  CHECK(sample.sample.size() == 500);

  const auto out = (dir / "q").string();
  REQUIRE(run_cli("spec-test-q --input " + csv + " --y y --z z1 --w w1 --q 0.5 --out " + out) == 0);
  const auto rep = read_json(fs::path(out) / "report.json");
  CHECK(rep["result"]["test"] == "specification-q");
  CHECK(rep["result"]["reject"].get<bool>() == decision_from_json(rep["result"]));
  CHECK(rep.contains("versions"));
  CHECK(rep["seed"] == 1);
  CHECK(fs::exists(fs::path(out) / "curves.csv"));
  CHECK(fs::exists(fs::path(out) / "deviation_curve.csv"));

  const auto full = (dir / "full").string();
  REQUIRE(run_cli("spec-test --input " + csv + " --y y --z z1 --w w1 --grid-n 5 --out " + full) == 0);
  CHECK(read_json(fs::path(full) / "report.json")["result"]["grid"]["points"].size() == 4);
  const auto rnd = (dir / "random").string();
  REQUIRE(run_cli("spec-test --input " + csv + " --y y --z z1 --w w1 --random-grid 6 --seed 3 --out " + rnd) == 0);
  const auto pts = read_json(fs::path(rnd) / "report.json")["result"]["grid"]["points"];
  REQUIRE(pts.size() == 6);
  CHECK(pts[0].get<double>() == make_random_grid(6, 3).points[0]);

  const auto ex = (dir / "exog").string();
  REQUIRE(run_cli("exog-test --input " + csv + " --y y --z z1 --w w1 --out " + ex) == 0);
  CHECK(read_json(fs::path(ex) / "report.json")["result"]["test"] == "exogeneity");

  const auto sel = (dir / "sel").string();
  REQUIRE(run_cli("select-dims --input " + csv + " --y y --z z1 --w w1 --test exogeneity --out " + sel) == 0);
  const auto js = read_json(fs::path(sel) / "report.json");
  CHECK(js["lattice_bounds"]["k_max"] == 4);
  CHECK(js["lattice_bounds"]["m_max"] == 22);
  for (const auto& cell : js["selection"]["table"]) {
    CHECK(cell["k_n"].get<int>() <= 4);
    CHECK(cell["m_n"].get<int>() <= 22);
  }

  const auto sim = (dir / "sim").string();
  REQUIRE(run_cli("simulate --design alt_rho4 --n 200 --reps 3 --test specification-q --out " + sim) == 0);
  const auto jm = read_json(fs::path(sim) / "report.json");
  CHECK(jm["report"]["replications"] == 3);
  CHECK(jm["report"]["spec"]["design"] == "alt_rho4");
  CHECK(fs::exists(fs::path(sim) / "replications.csv"));

  const auto two = (dir / "two.csv").string();
  REQUIRE(run_cli("generate --design additive_null --n 300 --out " + two) == 0);
  const auto add = (dir / "add").string();
  CHECK(run_cli("add-test --input " + two + " --y y --z z1 --z z2 --w w1 --w w2 --kn 3 --ln 4 --mn 5 --out " + add) == 0);
  CHECK(read_json(fs::path(add) / "report.json")["result"]["test"] == "additivity");

  // invalid configurations exit nonzero
  CHECK(run_cli("spec-test-q --input " + csv + " --y y --z z1 --w w1 --kn 5 --mn 3") != 0);
  CHECK(run_cli("spec-test-q --input " + csv + " --y y --z nope --w w1") != 0);
  CHECK(run_cli("spec-test-q --input " + csv + " --y y --z z1 --w w1 --q 1.5") != 0);
  CHECK(run_cli("add-test --input " + csv + " --y y --z z1 --w w1") != 0);
  CHECK(run_cli("simulate --design bogus") != 0);
  fs::remove_all(dir);
}

TEST_CASE("command line size on null data") {
  const auto dir = scratch_dir("size");
  int accepted = 0;
  for (int seed = 1; seed <= 10; ++seed) {
    const auto csv = (dir / ("d" + std::to_string(seed) + ".csv")).string();
    REQUIRE(run_cli("generate --design null --n 500 --seed " + std::to_string(seed) + " --out " + csv) == 0);
    const auto out = (dir / ("o" + std::to_string(seed))).string();
    REQUIRE(run_cli("spec-test-q --input " + csv + " --y y --z z1 --w w1 --q 0.5 --out " + out) == 0);
    accepted += read_json(fs::path(out) / "report.json")["result"]["reject"].get<bool>() ? 0 : 1;
  }
  CHECK(accepted >= 9);
  fs::remove_all(dir);
}
