#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

using json = nlohmann::json;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(ADDRISK_CLI_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  char buf[4096];
  while (std::size_t got = fread(buf, 1, sizeof(buf), pipe)) res.output.append(buf, got);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp_path(const std::string& name) { return "cli_test_" + name; }

}  // namespace

TEST_CASE("cli fit on the bundled fixture") {
  const std::string out = tmp_path("fit.json");
  const RunResult res = run(std::string("fit ") + ADDRISK_BCOS_CSV + " --out " + out);
  INFO(res.output);
  REQUIRE(res.exit_code == 0);

  const json report = json::parse(slurp(out));
  CHECK(report["n"] == 94);
  CHECK(report["converged"] == true);
  CHECK(std::abs(report["beta"]["est"][0].get<double>() - 0.03136608) < 1e-4);
  CHECK(std::abs(report["beta"]["se"][0].get<double>() - 0.09057521) < 1e-3);
  CHECK(report["lambda"].size() == report["grid_times"].size());

  // manifest sits beside the output
  const json manifest = json::parse(slurp(out + ".manifest.json"));
  CHECK(manifest["command"] == "fit");
  CHECK(manifest["config"]["hn"] == 1.5);
}

TEST_CASE("cli fit with a different hn multiplier") {
  const RunResult res = run(std::string("fit ") + ADDRISK_BCOS_CSV + " --hn 0.05");
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  // stdout carries the Est / SE table
  CHECK(res.output.find("0.0313") != std::string::npos);
  CHECK(res.output.find("0.0825") != std::string::npos);
}

TEST_CASE("cli fit rejects malformed rows with exit code 2") {
  const std::string bad = tmp_path("bad.csv");
  {
    std::ofstream f(bad);
    f << "left,right,L,I,R,covariate\n45,Inf,0,0,1,0\n6,10,1,1,0,0\n";
  }
  const RunResult res = run("fit " + bad);
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("row 2") != std::string::npos);
}

TEST_CASE("cli boot is reproducible under a fixed seed") {
  const std::string out1 = tmp_path("boot1.json");
  const std::string out2 = tmp_path("boot2.json");
  const std::string args = std::string("boot ") + ADDRISK_BCOS_CSV +
                           " --boot-num 40 --seed 7 --ci norm,perc --out ";
  REQUIRE(run(args + out1).exit_code == 0);
  REQUIRE(run(args + out2).exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));

  const json report = json::parse(slurp(out1));
  CHECK(report["CI_beta"].contains("normal"));
  CHECK(report["CI_beta"].contains("percent"));
  CHECK_FALSE(report["CI_beta"].contains("bca"));
}

TEST_CASE("cli simulate output re-ingests cleanly") {
  const std::string out = tmp_path("sim.csv");
  const RunResult sim = run("simulate --scenario const --n 120 --beta 0.5 --seed 11 --out " + out);
  INFO(sim.output);
  REQUIRE(sim.exit_code == 0);

  const RunResult refit = run("fit " + out);
  INFO(refit.output);
  CHECK(refit.exit_code == 0);
}

TEST_CASE("cli survcurve writes monotone group curves") {
  const std::string out = tmp_path("curve.csv");
  const RunResult res =
      run(std::string("survcurve ") + ADDRISK_BCOS_CSV + " --boot-num 30 --seed 3 --out " + out);
  INFO(res.output);
  REQUIRE(res.exit_code == 0);

  std::ifstream in(out);
  std::string header;
  std::getline(in, header);
  CHECK(header == "time,group,estimate,lower,upper");
  double prev_est = 2.0, prev_group = -1.0;
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> f;
    while (std::getline(ss, tok, ',')) f.push_back(std::stod(tok));
    REQUIRE(f.size() == 5);
    if (f[1] != prev_group) prev_est = 2.0;
    CHECK(f[2] <= prev_est + 1e-12);
    prev_group = f[1];
    prev_est = f[2];
  }
  CHECK(rows > 0);
}

TEST_CASE("cli bench reports one row per method and size") {
  const std::string out = tmp_path("bench.csv");
  const RunResult res = run("bench --sizes 60,80 --reps 1 --out " + out);
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(out);
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line == "method,n,m,p,ATE_s,ATS_s");
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
}
