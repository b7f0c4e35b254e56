#pragma once

#include <string>

#include <json.hpp>

#include "acopf/sqp.hpp"

namespace acopf {

inline constexpr int kReportSchemaVersion = 1;

struct RunConfig {
  std::string case_path;
  double rho = 1e3;
  int admm_max_iter = 1000;
  double admm_eps = 1e-4;
  double sqp_tol = 1e-4;
  int sqp_max_iter = 50;
  double merit_mu = 1e5;
  double delta0 = 1.0;
  int threads = 1;
  std::string output_path;  // empty: standard output
  std::string log_level = "info";

  SqpConfig sqp_config() const;
};

nlohmann::json record_to_json(const SqpRecord& r);
nlohmann::json make_report(const RunConfig& run, const SqpReport& rep);

// 0 converged, 2 on iteration or trust-region limits.
int exit_code(SqpStatus s);

}  // namespace acopf
