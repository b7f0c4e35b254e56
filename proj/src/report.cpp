#include "acopf/report.hpp"

#include <cmath>
#include <filesystem>

namespace acopf {

SqpConfig RunConfig::sqp_config() const {
  SqpConfig c;
  c.mu = merit_mu;
  c.tol = sqp_tol;
  c.delta0 = delta0;
  c.max_iter = sqp_max_iter;
  c.admm.rho = rho;
  c.admm.max_iter = admm_max_iter;
  c.admm.eps = admm_eps;
  c.admm.threads = threads;
  return c;
}

nlohmann::json record_to_json(const SqpRecord& r) {
  return {{"k", r.k},
          {"merit", r.merit},
          {"objective", r.objective},
          {"violation", r.violation},
          {"step_norm", r.step_norm},
          {"delta", r.delta},
          {"accepted", r.accepted},
          {"reject_reason", to_string(r.reject)},
          {"ared", r.ared},
          {"pred", r.pred},
          {"merit_next", r.merit_next},
          {"delta_next", r.delta_next},
          {"admm_iterations", r.admm_iterations},
          {"admm_primal_residual", r.admm_primal},
          {"admm_dual_residual", r.admm_dual}};
}

nlohmann::json make_report(const RunConfig& run, const SqpReport& rep) {
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& r : rep.iterations) iters.push_back(record_to_json(r));
  return {{"schema_version", kReportSchemaVersion},
          {"case", std::filesystem::path(run.case_path).filename().string()},
          {"config",
           {{"rho", run.rho},
            {"admm_max_iter", run.admm_max_iter},
            {"admm_eps", run.admm_eps},
            {"sqp_tol", run.sqp_tol},
            {"sqp_max_iter", run.sqp_max_iter},
            {"merit_mu", run.merit_mu},
            {"delta0", run.delta0},
            {"threads", run.threads}}},
          {"iterations", iters},
          {"final",
           {{"objective", rep.objective},
            {"primal_infeas", rep.primal_infeas},
            {"dual_infeas", rep.dual_infeas},
            {"sqp_steps", rep.sqp_steps},
            {"sqp_iterations", static_cast<int>(rep.iterations.size())},
            {"admm_total_iters", rep.admm_total_iters},
            {"wall_time_s", std::round(rep.wall_time_s * 100.0) / 100.0}}},
          {"status", to_string(rep.status)}};
}

int exit_code(SqpStatus s) { return s == SqpStatus::Converged ? 0 : 2; }

}  // namespace acopf
