#include "qpdecon/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace qpdecon;
namespace fs = std::filesystem;

namespace {

struct Run
{
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args)
{
  args.insert(args.begin(), "qpdecon");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return { code, out.str(), err.str() };
}

fs::path scratch(const std::string& name)
{
  const fs::path p = fs::path(QPDECON_TEST_DIR) / "cli_scratch" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_data(const fs::path& dir, int n)
{
  std::mt19937_64 rng(17);
  std::gamma_distribution<double> gd(5.0, 1.0);
  std::normal_distribution<double> nd(0.0, std::sqrt(3.2));
  const fs::path p = dir / "y.csv";
  std::ofstream out(p);
  for (int i = 0; i < n; ++i)
    out << gd(rng) + nd(rng) << '\n';
  return p;
}

int count_lines(const std::string& s)
{
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST_CASE("usage and data errors map to exit codes")
{
  const fs::path dir = scratch("errors");
  const fs::path data = write_data(dir, 200);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({ "fit", "--noise", "gaussian:sigma2=3.2" }).code == kExitUsage);
  CHECK(run({ "fit", "--input", data.string(), "--noise", "cauchy:1", "--out", dir.string() }).code ==
        kExitUsage);
  CHECK(run({ "simulate", "--methods", "qp-nope", "--reps", "1", "--out", dir.string() }).code ==
        kExitUsage);

  const fs::path empty = dir / "empty.csv";
  std::ofstream(empty).close();
  CHECK(run({ "fit", "--input", empty.string(), "--noise", "gaussian:sigma2=3.2", "--out", dir.string() })
          .code == kExitData);
  CHECK(run({ "fit", "--input", (dir / "missing.csv").string(), "--noise", "gaussian:sigma2=3.2", "--out",
              dir.string() })
          .code == kExitData);
}

TEST_CASE("fit writes a result")
{
  const fs::path dir = scratch("fit");
  const fs::path data = write_data(dir, 300);
  const Run r = run({ "fit", "--input", data.string(), "--noise", "gaussian:sigma2=3.2", "--lambda", "0.01",
                      "--regularizer", "d2", "--out", dir.string() });
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "result.json"));
  CHECK(j["lambda"].get<double>() == 0.01);
  CHECK(j["grid"]["K"].get<int>() == 52);
  CHECK(j["pdf"].size() == 52);
  CHECK(j["quantiles"].size() == 9);
  CHECK(j["diagnostics"]["solver"]["max_violation"].get<double>() <= 1e-8);
  CHECK(fs::exists(dir / "quantiles.csv"));
  CHECK(fs::exists(dir / "effective_config.toml"));
}

TEST_CASE("scree without a value stops with the curve")
{
  const fs::path dir = scratch("scree");
  const fs::path data = write_data(dir, 300);
  const Run r = run({ "fit", "--input", data.string(), "--noise", "gaussian:sigma2=3.2", "--lambda", "scree",
                      "--regularizer", "gauss", "--out", dir.string() });
  CHECK(r.code == kExitSelectionRequired);
  const std::string csv = slurp(dir / "scree.csv");
  CHECK(count_lines(csv) == 62);
  const std::string svg = slurp(dir / "scree.svg");
  CHECK(svg.find("6,4") != std::string::npos);
  CHECK(svg.find("2,3") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "result.json"));

  const fs::path dir2 = scratch("scree_cmd");
  const Run s = run({ "scree", "--input", data.string(), "--noise", "gaussian:sigma2=3.2", "--lambda-count",
                      "21", "--out", dir2.string() });
  CHECK(s.code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir2 / "scree.json"));
  CHECK(j["lambdas"].size() == 21);
  CHECK(j.contains("lambda_sure"));
}

TEST_CASE("simulate is reproducible")
{
  const fs::path a = scratch("sim_a");
  const fs::path b = scratch("sim_b");
  const std::vector<std::string> common{ "simulate", "--n", "300", "--reps", "1", "--seed", "7",
                                         "--methods", "qp-in@0.01/d2,kd-rect@0.9" };
  auto args_a = common;
  args_a.insert(args_a.end(), { "--out", a.string() });
  auto args_b = common;
  args_b.insert(args_b.end(), { "--out", b.string() });
  REQUIRE(run(args_a).code == kExitOk);
  REQUIRE(run(args_b).code == kExitOk);
  // the recorded config names the output directory, everything else must match
  auto ja = nlohmann::json::parse(slurp(a / "report.json"));
  auto jb = nlohmann::json::parse(slurp(b / "report.json"));
  ja.erase("effective_config");
  jb.erase("effective_config");
  CHECK(ja.dump() == jb.dump());
  CHECK(slurp(a / "mae_table.csv") == slurp(b / "mae_table.csv"));
  CHECK(ja["methods"].size() == 2);
}
