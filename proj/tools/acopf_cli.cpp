// acopf solve CASE.m [options]
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "acopf/case_io.hpp"
#include "acopf/error.hpp"
#include "acopf/report.hpp"
#include "acopf/sqp.hpp"

namespace {

// Iteration counts are often written as 1e3; accept that when it is integral.
void add_count(CLI::App* app, const std::string& name, int& target, const std::string& desc) {
  app->add_option_function<double>(
         name, [&target](const double& v) { target = static_cast<int>(v); }, desc)
      ->check(CLI::Validator(
          [](std::string& s) -> std::string {
            double v = 0.0;
            if (!CLI::detail::lexical_cast(s, v) || v < 1 || v > 1e9 || v != static_cast<double>(static_cast<long>(v)))
              return "expected a positive integer, got " + s;
            return {};
          },
          "POSITIVE INTEGER"));
}

int run(int argc, char** argv) {
  acopf::RunConfig rc;
  if (const char* env = std::getenv("ACOPF_THREADS")) {
    try {
      rc.threads = std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "error: ACOPF_THREADS must be an integer\n";
      return 1;
    }
  }

  CLI::App app{"Trust-region SQP with ADMM subproblem solves for AC optimal power flow"};
  app.require_subcommand(1);
  auto* solve = app.add_subcommand("solve", "solve a MATPOWER case");
  solve->add_option("case", rc.case_path, "MATPOWER .m file")->required()->check(CLI::ExistingFile);
  solve->add_option("--rho", rc.rho, "ADMM penalty")->check(CLI::PositiveNumber);
  add_count(solve, "--admm-max-iter", rc.admm_max_iter, "ADMM iteration limit per QP");
  solve->add_option("--admm-eps", rc.admm_eps, "ADMM residual tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--sqp-tol", rc.sqp_tol, "SQP tolerance")->check(CLI::PositiveNumber);
  add_count(solve, "--sqp-max-iter", rc.sqp_max_iter, "SQP iteration limit");
  solve->add_option("--merit-mu", rc.merit_mu, "l1 merit penalty")->check(CLI::PositiveNumber);
  solve->add_option("--delta0", rc.delta0, "initial trust radius")->check(CLI::PositiveNumber);
  solve->add_option("--threads", rc.threads, "worker threads (overrides ACOPF_THREADS)")->check(CLI::PositiveNumber);
  solve->add_option("--output,-o", rc.output_path, "report file (default: stdout)");
  solve->add_option("--log-level", rc.log_level, "quiet | info | debug")
      ->check(CLI::IsMember({"quiet", "info", "debug"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (rc.threads < 1) {
    std::cerr << "error: threads must be >= 1\n";
    return 1;
  }

  acopf::Network net;
  try {
    net = acopf::load_network(rc.case_path);
  } catch (const acopf::Error& e) {
    std::cerr << "error: " << rc.case_path << ": " << e.what() << "\n";
    return 1;
  }

  acopf::SqpResult res;
  try {
    res = acopf::solve(net, rc.sqp_config());
  } catch (const acopf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (rc.log_level != "quiet") {
    for (const auto& r : res.report.iterations) {
      std::cerr << "sqp " << r.k << " merit " << r.merit << " |d| " << r.step_norm << " delta " << r.delta
                << (r.accepted ? " accepted" : " rejected") << " admm " << r.admm_iterations << "\n";
    }
    std::cerr << "status " << acopf::to_string(res.report.status) << " objective " << res.report.objective
              << " primal " << res.report.primal_infeas << " dual " << res.report.dual_infeas << "\n";
  }

  const std::string text = acopf::make_report(rc, res.report).dump(2) + "\n";
  if (rc.output_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(rc.output_path);
    if (!out) {
      std::cerr << "error: cannot write " << rc.output_path << "\n";
      return 1;
    }
    out << text;
  }
  return acopf::exit_code(res.report.status);
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
