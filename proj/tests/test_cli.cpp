#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "maxdep_cli.hpp"

using namespace maxdep;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("maxdep_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& path, const std::string& content) { std::ofstream(path, std::ios::binary) << content; }

cli::json load(const std::string& path) { return cli::json::parse(slurp(path)); }

}  // namespace

TEST_CASE("csv parsing", "[cli]") {
  const auto t = cli::parse_csv("a, b\n1,2.5\n\n-3e2,+4\n", "x.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.values.rows() == 2);
  CHECK(t.values(1, 0) == -300.0);
  CHECK(t.values(1, 1) == 4.0);
  CHECK_THROWS_AS(cli::parse_csv("a,b\n1\n", "x"), cli::DataError);
  CHECK_THROWS_AS(cli::parse_csv("a,b\n1,nan\n", "x"), cli::DataError);
  CHECK_THROWS_AS(cli::parse_csv("a,b\n1,1,5\n", "x"), cli::DataError);
  CHECK_THROWS_AS(cli::parse_csv("a,b\n1,2;\n", "x"), cli::DataError);
  CHECK_THROWS_AS(cli::parse_csv("", "x"), cli::DataError);
  CHECK(cli::format_double(0.1) == "0.1");
  const auto round = cli::parse_csv(cli::to_csv({"x"}, RowMatrix::from_rows({{0.1 + 0.2}, {1e-300}})), "r");
  CHECK(round.values(0, 0) == 0.1 + 0.2);
  CHECK(round.values(1, 0) == 1e-300);
}

TEST_CASE("simulate writes csv and sidecar", "[cli]") {
  Workspace ws;
  const auto r = run({"simulate", "--model", "logistic", "--theta", "2", "--dim", "2", "--n", "100", "--seed", "7",
                      "--output", ws.path("d.csv")});
  REQUIRE(r.code == 0);
  const auto table = cli::read_csv(ws.path("d.csv"));
  CHECK(table.values.rows() == 100);
  CHECK(table.header == std::vector<std::string>{"U1", "U2"});
  const auto side = load(ws.path("d.csv.json"));
  CHECK(side["seed"] == 7);
  CHECK(side["subcommand"] == "simulate");
  CHECK(side["config_echo"]["theta"] == 2.0);
  CHECK(side["tool_version"] == std::string(maxdep::version));
  REQUIRE(run({"simulate", "--model", "logistic", "--theta", "2", "--dim", "2", "--n", "100", "--seed", "7",
               "--output", ws.path("e.csv")})
              .code == 0);
  CHECK(slurp(ws.path("d.csv")) == slurp(ws.path("e.csv")));
  // Library and CLI agree; constant folding may move the last bit.
  const auto lib = sample_logistic_ev(100, 2, 2.0, 7);
  REQUIRE(lib.values().rows() == 100);
  for (std::size_t i = 0; i < 200; ++i) REQUIRE(table.values.data()[i] == Approx(lib.values().data()[i]).epsilon(1e-14));
}

TEST_CASE("simulate spatial models", "[cli]") {
  Workspace ws;
  write(ws.path("sites.csv"), "x,y\n0,0\n1,0\n0,1\n1,1\n");
  REQUIRE(run({"simulate", "--model", "schlather", "--sites", ws.path("sites.csv"), "--range", "1.5", "--n", "50",
               "--seed", "1", "--output", ws.path("s.csv")})
              .code == 0);
  const auto s = cli::read_csv(ws.path("s.csv"));
  CHECK(s.values.rows() == 50);
  CHECK(s.values.cols() == 4);
  for (double z : s.values.data()) CHECK(z > 0.0);
  REQUIRE(run({"simulate", "--model", "smith", "--site", "0,0", "--site", "0.5,0.5", "--covariance", "1,0.2,0.2,1",
               "--margins", "uniform", "--n", "30", "--output", ws.path("m.csv")})
              .code == 0);
  const auto smith = cli::read_csv(ws.path("m.csv"));
  for (double u : smith.values.data()) {
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  const auto seeded = load(ws.path("m.csv.json"));
  CHECK(seeded["seed"].is_number_unsigned());
  write(ws.path("measure.json"), R"({"atoms": [[1, 0], [0.5, 0.5], [0, 1]], "masses": [0.5, 1, 0.5]})");
  REQUIRE(run({"simulate", "--model", "spectral", "--spectral", ws.path("measure.json"), "--n", "20", "--output",
               ws.path("p.csv")})
              .code == 0);
  CHECK(cli::read_csv(ws.path("p.csv")).values.rows() == 20);
}

TEST_CASE("usage and data errors map to exit codes", "[cli]") {
  Workspace ws;
  const auto missing_n = run({"simulate", "--model", "logistic", "--theta", "2"});
  CHECK(missing_n.code == 1);
  CHECK(missing_n.err.find("--n") != std::string::npos);
  CHECK(missing_n.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"simulate", "--model", "logistic", "--n", "5"}).code == 1);
  CHECK(run({"simulate", "--model", "schlather", "--n", "5"}).code == 1);
  CHECK(run({"simulate", "--model", "banana", "--n", "5"}).code == 1);
  CHECK(run({"test", "--kind", "kendall", "--input", ws.path("none.csv")}).code == 2);
  CHECK(run({"estimate", "--input", ws.path("none.csv")}).code == 2);
  write(ws.path("bad.csv"), "a,b\n1,2\n3,x\n");
  CHECK(run({"estimate", "--input", ws.path("bad.csv")}).code == 2);
  write(ws.path("ragged.csv"), "a,b\n1,2\n3\n");
  CHECK(run({"estimate", "--input", ws.path("ragged.csv")}).code == 2);
  write(ws.path("one.csv"), "a\n1\n2\n3\n");
  CHECK(run({"estimate", "--input", ws.path("one.csv")}).code == 2);
  write(ws.path("bad.json"), "{not json");
  CHECK(run({"project", "--input", ws.path("bad.json")}).code == 2);
  CHECK(run({"replay", ws.path("bad.json")}).code == 2);
  write(ws.path("d3.csv"), "a,b,c\n1,2,3\n2,3,1\n3,1,2\n");
  CHECK(run({"test", "--kind", "kendall", "--input", ws.path("d3.csv")}).code == 2);
  CHECK(run({"test", "--kind", "magic", "--input", ws.path("d3.csv")}).code == 1);
  CHECK(run({"estimate", "--input", ws.path("d3.csv"), "--method", "kernel"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"--version"}).code == 0);
}

TEST_CASE("numerical failures exit with code 3 and a JSON diagnostic", "[cli]") {
  Workspace ws;
  write(ws.path("flat.csv"), "a,b\n1,1\n1,1\n1,1\n1,1\n");
  const auto r = run({"test", "--kind", "kendall", "--input", ws.path("flat.csv"), "--output", ws.path("k.json")});
  CHECK(r.code == 3);
  const auto doc = load(ws.path("k.json"));
  CHECK(doc["error"]["type"] == "numerical");
  write(ws.path("far.csv"), "x,y\n0,0\n1000,1000\n");
  const auto field = run({"simulate", "--model", "smith", "--sites", ws.path("far.csv"), "--sigma", "0.01", "--n", "1",
                          "--output", ws.path("f.csv")});
  CHECK(field.code == 3);
  CHECK_FALSE(fs::exists(ws.path("f.csv")));
}

TEST_CASE("estimate report", "[cli]") {
  Workspace ws;
  REQUIRE(run({"simulate", "--model", "logistic", "--theta", "2", "--n", "2000", "--seed", "3", "--output",
               ws.path("d.csv")})
              .code == 0);
  REQUIRE(run({"estimate", "--input", ws.path("d.csv"), "--method", "cfg", "--resolution", "100", "--corrected",
               "--output", ws.path("e.json"), "--plot-csv", ws.path("plot.csv")})
              .code == 0);
  const auto doc = load(ws.path("e.json"));
  const auto& r = doc["results"];
  CHECK(r["n"] == 2000);
  CHECK(r["grid"].size() == 101);
  CHECK(r["raw"].size() == 101);
  CHECK(r["corrected_values"].size() == 101);
  CHECK(r["values"][50].get<double>() == Approx(std::sqrt(0.5)).margin(0.02));
  CHECK(r["values"][0].get<double>() == 1.0);
  CHECK(r["values"][100].get<double>() == 1.0);
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"tool_version", "subcommand", "config_echo", "seed", "results", "warnings",
                                         "runtime_ms"});
  std::istringstream plot(slurp(ws.path("plot.csv")));
  std::string line;
  std::getline(plot, line);
  CHECK(line == "v1,v2,A_hat,method");
  std::size_t rows = 0;
  while (std::getline(plot, line)) ++rows;
  CHECK(rows == 101);

  REQUIRE(run({"estimate", "--input", ws.path("d.csv"), "--method", "pickands", "--resolution", "2", "--output",
               ws.path("p.json")})
              .code == 0);
  CHECK(load(ws.path("p.json"))["results"]["grid"].size() == 3);
}

TEST_CASE("tied data produce a warning", "[cli]") {
  Workspace ws;
  write(ws.path("t.csv"), "a,b\n1,2\n1,3\n2,3\n4,1\n5,5\n");
  REQUIRE(run({"estimate", "--input", ws.path("t.csv"), "--output", ws.path("t.json")}).code == 0);
  CHECK_FALSE(load(ws.path("t.json"))["warnings"].empty());
}

TEST_CASE("project, fit and test pipelines", "[cli]") {
  Workspace ws;
  REQUIRE(run({"simulate", "--model", "logistic", "--theta", "2", "--n", "300", "--seed", "4", "--output",
               ws.path("d.csv")})
              .code == 0);
  REQUIRE(run({"estimate", "--input", ws.path("d.csv"), "--resolution", "20", "--corrected", "--output",
               ws.path("e.json")})
              .code == 0);
  REQUIRE(run({"project", "--input", ws.path("e.json"), "--output", ws.path("p.json")}).code == 0);
  const auto p = load(ws.path("p.json"))["results"];
  CHECK(p["constraint_residual"].get<double>() <= 1e-6);
  CHECK(p["atoms_resolution"] == 20);

  // A pilot that is already valid is a fixed point.
  cli::json valid = load(ws.path("e.json"));
  valid["results"]["values"] = p["projected"];
  write(ws.path("valid.json"), valid.dump());
  REQUIRE(run({"project", "--input", ws.path("valid.json"), "--output", ws.path("v.json")}).code == 0);
  CHECK(load(ws.path("v.json"))["results"]["objective"].get<double>() < 1e-6);

  // Exact logistic surface through the fit command.
  cli::json exact = valid;
  std::vector<double> values;
  for (const auto& point : exact["results"]["grid"]) {
    values.push_back(logistic_pickands(2.7, point.get<std::vector<double>>()));
  }
  exact["results"]["values"] = values;
  write(ws.path("exact.json"), exact.dump());
  REQUIRE(run({"fit", "--input", ws.path("exact.json"), "--family", "logistic", "--output", ws.path("f.json")}).code ==
          0);
  CHECK(load(ws.path("f.json"))["results"]["parameter"].get<double>() == Approx(2.7).margin(1e-3));
  REQUIRE(run({"fit", "--input", ws.path("d.csv"), "--family", "husler_reiss", "--output", ws.path("h.json")}).code ==
          0);

  REQUIRE(run({"test", "--kind", "cvm", "--input", ws.path("d.csv"), "--B", "50", "--m-set", "2,4", "--seed", "3",
               "--output", ws.path("c.json")})
              .code == 0);
  const auto c = load(ws.path("c.json"))["results"];
  CHECK(c["name"] == "cvm_maxstability");
  CHECK(c["B"] == 50);
  CHECK(c["per_m"].size() == 2);
  CHECK(c["p_value"].get<double>() > 0.0);
  CHECK(run({"test", "--kind", "cvm", "--input", ws.path("d.csv"), "--m-set", "1.5"}).code == 1);
  CHECK(run({"test", "--kind", "cvm", "--input", ws.path("d.csv"), "--B", "0"}).code == 1);
  REQUIRE(run({"test", "--kind", "gof", "--input", ws.path("d.csv"), "--B", "10", "--output", ws.path("g.json")})
              .code == 0);
  CHECK(load(ws.path("g.json"))["results"]["detail"].contains("parameter"));
}

TEST_CASE("kendall test through the CLI", "[cli]") {
  Workspace ws;
  REQUIRE(run({"simulate", "--model", "logistic", "--theta", "2", "--n", "1000", "--seed", "11", "--output",
               ws.path("d.csv")})
              .code == 0);
  REQUIRE(run({"test", "--kind", "kendall", "--input", ws.path("d.csv"), "--output", ws.path("k.json")}).code == 0);
  const auto r = load(ws.path("k.json"))["results"];
  CHECK(r["name"] == "kendall_moment");
  CHECK(r["p_value"].get<double>() > 0.05);
}

TEST_CASE("spectral subcommand", "[cli]") {
  Workspace ws;
  REQUIRE(run({"spectral", "--model", "schlather", "--site", "0", "--site", "1", "--N", "20000", "--seed", "5",
               "--output", ws.path("s.json"), "--atoms-output", ws.path("atoms.csv")})
              .code == 0);
  const auto r = load(ws.path("s.json"))["results"];
  CHECK(r["draws"] == 20000);
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(std::abs(r["moments"][d].get<double>() - 1.0) <= 4.0 * r["moment_standard_errors"][d].get<double>());
  }
  const auto atoms = cli::read_csv(ws.path("atoms.csv"));
  CHECK(atoms.header == std::vector<std::string>{"s1", "s2", "mass"});
  CHECK(atoms.values.rows() == r["atoms"].get<std::size_t>());
  REQUIRE(run({"spectral", "--model", "unit", "--site", "0", "--site", "1", "--N", "200", "--output",
               ws.path("u.json")})
              .code == 0);
  CHECK(load(ws.path("u.json"))["results"]["total_mass"].get<double>() == Approx(2.0));
}

TEST_CASE("replay reproduces runs", "[cli]") {
  Workspace ws;
  REQUIRE(run({"simulate", "--model", "schlather", "--site", "0,0", "--site", "2,1", "--n", "40", "--output",
               ws.path("d.csv")})
              .code == 0);
  REQUIRE(run({"replay", ws.path("d.csv.json"), "--output", ws.path("again.csv")}).code == 0);
  CHECK(slurp(ws.path("d.csv")) == slurp(ws.path("again.csv")));
  REQUIRE(run({"test", "--kind", "comparison", "--input", ws.path("d.csv"), "--B", "10", "--output",
               ws.path("t.json")})
              .code == 0);
  REQUIRE(run({"replay", ws.path("t.json"), "--output", ws.path("t2.json")}).code == 0);
  auto a = load(ws.path("t.json"));
  auto b = load(ws.path("t2.json"));
  CHECK(a["results"] == b["results"]);
  CHECK(a["seed"] == b["seed"]);
  CHECK(run({"replay", ws.path("d.csv")}).code == 2);
}
