// Command-line front end: fit, boot, simulate, bench, survcurve.

#include "addrisk/addrisk.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

// Every output file gets a sibling manifest sufficient to reproduce it.
void write_manifest(const std::string& out_path, const std::string& command, const std::string& input,
                    const json& config) {
  json manifest;
  manifest["command"] = command;
  manifest["input"] = input;
  manifest["config"] = config;
  manifest["version"] = addrisk::kVersion;
  manifest["timestamp"] = now_iso8601();
  write_text_file(out_path + ".manifest.json", manifest.dump(2) + "\n");
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json ci_map_to_json(const std::map<std::string, std::vector<addrisk::CiInterval>>& ci) {
  json out;
  for (const auto& [type, intervals] : ci) {
    json arr = json::array();
    for (const addrisk::CiInterval& c : intervals) arr.push_back(json{{"lwr", c.lwr}, {"upr", c.upr}});
    out[type] = arr;
  }
  return out;
}

addrisk::ScenarioKind parse_scenario(const std::string& name) {
  if (name == "const" || name == "1") return addrisk::ScenarioKind::const_hazard;
  if (name == "timedep" || name == "2") return addrisk::ScenarioKind::timedep;
  if (name == "sqrt2cov" || name == "3") return addrisk::ScenarioKind::sqrt_two_cov;
  throw CLI::ValidationError("--scenario must be one of const, timedep, sqrt2cov");
}

int cmd_fit(const std::string& csv_path, double hn, int max_iter, double tol, const std::string& out_path) {
  const addrisk::Dataset data = addrisk::read_dataset_csv(csv_path);
  const addrisk::Design design = addrisk::Design::build(data, addrisk::CovariateProcess::time_independent());

  addrisk::SolverConfig solver;
  solver.max_iter = max_iter;
  solver.tol = tol;
  const addrisk::FitResult fit = addrisk::mm_fit(design, solver);
  if (!fit.converged) {
    std::string trace_path = out_path.empty() ? "fit_trace.txt" : out_path + ".trace.txt";
    std::ostringstream trace;
    trace.precision(12);
    for (double v : fit.loglik_trace) trace << v << "\n";
    write_text_file(trace_path, trace.str());
    std::cerr << "error: solver did not converge in " << max_iter << " iterations; trace written to "
              << trace_path << "\n";
    return kExitEstimation;
  }

  addrisk::ProfileConfig prof;
  prof.hn_multiplier = hn;
  prof.solver = solver;
  const addrisk::ProfileCovariance cov = addrisk::profile_covariance(design, fit, prof);

  json report;
  report["command"] = "fit";
  report["input"] = csv_path;
  report["n"] = design.n;
  report["p"] = design.p;
  report["m"] = design.grid.m();
  report["hn_multiplier"] = hn;
  report["beta"] = {{"est", vector_to_json(fit.params.beta)}, {"se", vector_to_json(cov.se)}};
  report["lambda"] = vector_to_json(fit.params.lambda());
  report["grid_times"] = json(design.grid.times);
  report["loglik"] = fit.loglik;
  report["iterations"] = fit.n_iter;
  report["converged"] = fit.converged;

  std::cout << std::setprecision(8) << std::fixed;
  std::cout << "       Est        SE\n";
  for (int j = 0; j < design.p; ++j)
    std::cout << std::setw(10) << fit.params.beta[j] << " " << std::setw(10) << cov.se[j] << "\n";

  if (!out_path.empty()) {
    write_text_file(out_path, report.dump(2) + "\n");
    write_manifest(out_path, "fit", csv_path,
                   json{{"hn", hn}, {"max_iter", max_iter}, {"tol", tol}});
  }
  return kExitOk;
}

int cmd_boot(const std::string& csv_path, const addrisk::BootConfig& config, int max_iter, double tol,
             const std::string& out_path) {
  const addrisk::Dataset data = addrisk::read_dataset_csv(csv_path);
  addrisk::SolverConfig solver;
  solver.max_iter = max_iter;
  solver.tol = tol;
  const addrisk::BootstrapResult res = addrisk::boot_analyze(data, config, solver);

  json report;
  report["command"] = "boot";
  report["input"] = csv_path;
  report["boot_num"] = config.boot_num;
  report["conf"] = config.conf;
  report["seed"] = config.seed;
  report["beta_boot_se"] = {{"est", vector_to_json(res.beta_est)}, {"boot_se", vector_to_json(res.beta_boot_se)}};
  report["CI_beta"] = ci_map_to_json(res.ci_beta);
  if (res.surv_est.size() > 0) {
    report["surv_boot_se"] = {{"time_points", json(config.surv_times)},
                              {"est", vector_to_json(res.surv_est)},
                              {"boot_se", vector_to_json(res.surv_boot_se)}};
    report["CI_surv"] = ci_map_to_json(res.ci_surv);
  }
  report["n_failed"] = res.n_failed;

  std::cout << std::setprecision(8) << std::fixed;
  std::cout << "       Est   boot_se\n";
  for (int j = 0; j < res.beta_est.size(); ++j)
    std::cout << std::setw(10) << res.beta_est[j] << " " << std::setw(10) << res.beta_boot_se[j] << "\n";

  if (!out_path.empty()) {
    write_text_file(out_path, report.dump(2) + "\n");
    json cfg;
    cfg["boot_num"] = config.boot_num;
    cfg["conf"] = config.conf;
    cfg["seed"] = config.seed;
    cfg["threads"] = config.threads;
    cfg["max_iter"] = max_iter;
    cfg["tol"] = tol;
    write_manifest(out_path, "boot", csv_path, cfg);
  }
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_name, int n, const std::string& beta_csv, std::uint64_t seed,
                 const std::string& out_path) {
  const addrisk::ScenarioKind kind = parse_scenario(scenario_name);
  const std::vector<double> beta = parse_list(beta_csv);
  if (beta.empty()) throw CLI::ValidationError("--beta must list at least one coefficient");
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<int>(beta.size()));
  const addrisk::Scenario scenario = addrisk::Scenario::make(kind, b, n, seed);
  const addrisk::Dataset data = addrisk::generate(scenario);
  addrisk::write_dataset_csv(out_path, data);
  write_manifest(out_path, "simulate", "",
                 json{{"scenario", scenario_name}, {"n", n}, {"beta", beta}, {"seed", seed}});
  std::cout << "wrote " << data.size() << " observations to " << out_path << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& sizes_csv, int reps, const std::string& scenario_name,
              const std::string& beta_csv, std::uint64_t seed, const std::string& out_path) {
  const std::vector<double> sizes_d = parse_list(sizes_csv);
  std::vector<int> sizes(sizes_d.begin(), sizes_d.end());
  if (sizes.empty()) throw CLI::ValidationError("--sizes must list at least one sample size");
  const std::vector<double> beta = parse_list(beta_csv);
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<int>(beta.size()));

  const std::vector<addrisk::BenchRecord> records =
      addrisk::bench(sizes, parse_scenario(scenario_name), b, reps, seed);

  std::ostringstream csv;
  csv << "method,n,m,p,ATE_s,ATS_s\n";
  csv.precision(6);
  for (const addrisk::BenchRecord& r : records)
    csv << r.method << "," << r.n << "," << r.m << "," << r.p << "," << std::fixed << r.ate_s << ","
        << r.ats_s << "\n";
  std::cout << csv.str();
  if (!out_path.empty()) {
    write_text_file(out_path, csv.str());
    write_manifest(out_path, "bench", "",
                   json{{"sizes", sizes}, {"reps", reps}, {"scenario", scenario_name}, {"seed", seed}});
  }
  return kExitOk;
}

int cmd_survcurve(const std::string& csv_path, int group_col, int boot_num, double conf, std::uint64_t seed,
                  int threads, const std::string& out_path) {
  const addrisk::Dataset data = addrisk::read_dataset_csv(csv_path);
  const int p = addrisk::covariate_dim(data);
  if (group_col < 1 || group_col > p)
    throw CLI::ValidationError("--group-col must name a covariate column between 1 and " + std::to_string(p));

  std::set<double> levels;
  for (const addrisk::Observation& o : data) levels.insert(o.x[group_col - 1]);
  if (levels.size() > 8) throw CLI::ValidationError("group column has more than 8 levels");

  std::vector<Eigen::VectorXd> groups;
  std::vector<double> labels;
  for (double level : levels) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    x[group_col - 1] = level;
    groups.push_back(x);
    labels.push_back(level);
  }

  const std::vector<addrisk::SurvivalBandRow> rows =
      addrisk::survival_bands(data, groups, labels, boot_num, conf, seed, threads);

  std::ostringstream csv;
  csv << "time,group,estimate,lower,upper\n";
  csv.precision(10);
  for (const addrisk::SurvivalBandRow& r : rows)
    csv << r.time << "," << r.group << "," << r.estimate << "," << r.lower << "," << r.upper << "\n";
  if (!out_path.empty()) {
    write_text_file(out_path, csv.str());
    write_manifest(out_path, "survcurve", csv_path,
                   json{{"group_col", group_col}, {"boot_num", boot_num}, {"conf", conf}, {"seed", seed}});
  } else {
    std::cout << csv.str();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Additive risks model for case-II interval-censored data (gradient-MM fit)"};
  app.require_subcommand(1);

  int threads = 1;
  if (const char* env = std::getenv("ARM_MM_THREADS")) threads = std::max(1, std::atoi(env));
  app.add_option("--threads", threads, "worker threads for bootstrap replicates");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "maximum-likelihood fit with profile-likelihood SEs");
  std::string fit_csv, fit_out;
  double fit_hn = 1.5, fit_tol = 1e-3;
  int fit_max_iter = 1000;
  fit_cmd->add_option("csv", fit_csv, "dataset in the canonical 6-column layout")->required();
  fit_cmd->add_option("--hn", fit_hn, "h_n multiplier c in h_n = c n^{-1/2}")->capture_default_str();
  fit_cmd->add_option("--max-iter", fit_max_iter)->capture_default_str();
  fit_cmd->add_option("--tol", fit_tol)->capture_default_str();
  fit_cmd->add_option("--out", fit_out, "write the JSON report here");

  // boot
  auto* boot_cmd = app.add_subcommand("boot", "bootstrap standard errors and confidence intervals");
  std::string boot_csv, boot_out, boot_ci = "norm,basic,perc,bca", surv_times, surv_cov;
  int boot_num = 200, boot_max_iter = 1000;
  double boot_conf = 0.95, boot_tol = 1e-3;
  std::uint64_t boot_seed = 1;
  boot_cmd->add_option("csv", boot_csv)->required();
  boot_cmd->add_option("--boot-num", boot_num)->capture_default_str();
  boot_cmd->add_option("--conf", boot_conf)->capture_default_str();
  boot_cmd->add_option("--ci", boot_ci, "subset of norm,basic,perc,bca")->capture_default_str();
  boot_cmd->add_option("--surv-times", surv_times, "survival probability time points");
  boot_cmd->add_option("--surv-cov", surv_cov, "covariate value for the survival targets");
  boot_cmd->add_option("--seed", boot_seed)->capture_default_str();
  boot_cmd->add_option("--max-iter", boot_max_iter)->capture_default_str();
  boot_cmd->add_option("--tol", boot_tol)->capture_default_str();
  boot_cmd->add_option("--out", boot_out);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "draw a synthetic dataset");
  std::string sim_scenario = "const", sim_beta = "0.5", sim_out = "simulated.csv";
  int sim_n = 200;
  std::uint64_t sim_seed = 1;
  sim_cmd->add_option("--scenario", sim_scenario, "const, timedep or sqrt2cov")->capture_default_str();
  sim_cmd->add_option("--n", sim_n)->capture_default_str();
  sim_cmd->add_option("--beta", sim_beta, "comma-separated true coefficients")->capture_default_str();
  sim_cmd->add_option("--seed", sim_seed)->capture_default_str();
  sim_cmd->add_option("--out", sim_out)->capture_default_str();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "timing comparison of the MM and direct fits");
  std::string bench_sizes = "100,500", bench_scenario = "const", bench_beta = "0.5", bench_out;
  int bench_reps = 3;
  std::uint64_t bench_seed = 20240401;
  bench_cmd->add_option("--sizes", bench_sizes)->capture_default_str();
  bench_cmd->add_option("--reps", bench_reps)->capture_default_str();
  bench_cmd->add_option("--scenario", bench_scenario)->capture_default_str();
  bench_cmd->add_option("--beta", bench_beta)->capture_default_str();
  bench_cmd->add_option("--seed", bench_seed)->capture_default_str();
  bench_cmd->add_option("--out", bench_out);

  // survcurve
  auto* surv_cmd = app.add_subcommand("survcurve", "group survival curves with bootstrap bands");
  std::string curve_csv, curve_out;
  int curve_group_col = 1, curve_boot = 200;
  double curve_conf = 0.95;
  std::uint64_t curve_seed = 1;
  surv_cmd->add_option("csv", curve_csv)->required();
  surv_cmd->add_option("--group-col", curve_group_col, "1-based covariate column defining the groups")
      ->capture_default_str();
  surv_cmd->add_option("--boot-num", curve_boot)->capture_default_str();
  surv_cmd->add_option("--conf", curve_conf)->capture_default_str();
  surv_cmd->add_option("--seed", curve_seed)->capture_default_str();
  surv_cmd->add_option("--out", curve_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_csv, fit_hn, fit_max_iter, fit_tol, fit_out);
    if (boot_cmd->parsed()) {
      addrisk::BootConfig config;
      config.boot_num = boot_num;
      config.conf = boot_conf;
      config.seed = boot_seed;
      config.threads = threads;
      config.ci_types.clear();
      std::stringstream ss(boot_ci);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (tok == "norm" || tok == "normal") config.ci_types.insert("normal");
        else if (tok == "basic") config.ci_types.insert("basic");
        else if (tok == "perc" || tok == "percent") config.ci_types.insert("percent");
        else if (tok == "bca") config.ci_types.insert("bca");
        else throw CLI::ValidationError("unknown CI type '" + tok + "'");
      }
      if (!surv_times.empty()) {
        config.surv_times = parse_list(surv_times);
        const std::vector<double> cov = parse_list(surv_cov);
        config.surv_covariate = Eigen::Map<const Eigen::VectorXd>(cov.data(), static_cast<int>(cov.size()));
      }
      return cmd_boot(boot_csv, config, boot_max_iter, boot_tol, boot_out);
    }
    if (sim_cmd->parsed()) return cmd_simulate(sim_scenario, sim_n, sim_beta, sim_seed, sim_out);
    if (bench_cmd->parsed()) return cmd_bench(bench_sizes, bench_reps, bench_scenario, bench_beta, bench_seed, bench_out);
    if (surv_cmd->parsed())
      return cmd_survcurve(curve_csv, curve_group_col, curve_boot, curve_conf, curve_seed, threads, curve_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const addrisk::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  }
  return kExitUsage;
}
