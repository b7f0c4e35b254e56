// Serial reference path (threads = 1) against the OpenMP kernels on one ADMM solve.

#include <map>
#include <string>
#include <utility>

#include <benchmark/benchmark.h>

#include "acopf/admm.hpp"
#include "acopf/qp.hpp"
#include "acopf/sqp.hpp"

namespace {

const acopf::QPData& case_qp(const std::string& name) {
  static std::map<std::string, std::pair<acopf::Network, acopf::QPData>> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    it = cache.emplace(name, std::make_pair(acopf::load_network(std::string(ACOPF_DATA_DIR) + "/" + name),
                                            acopf::QPData{})).first;
    auto& [net, qp] = it->second;
    qp = acopf::build_qp(net, acopf::initial_iterate(net), 1.0);
  }
  return it->second.second;
}

void admm(benchmark::State& state, const char* name) {
  const auto& qp = case_qp(name);
  acopf::AdmmConfig cfg;
  cfg.rho = 2e4;
  cfg.max_iter = 100;
  cfg.eps = 1e-300;  // run the full iteration budget
  cfg.threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto sol = acopf::solve_qp(qp, cfg);
    benchmark::DoNotOptimize(sol.step.w.data());
  }
  state.counters["admm_iters/s"] =
      benchmark::Counter(static_cast<double>(cfg.max_iter), benchmark::Counter::kIsIterationInvariantRate);
}

}  // namespace

BENCHMARK_CAPTURE(admm, case118, "case118.m")->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(admm, case300, "case300.m")->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
