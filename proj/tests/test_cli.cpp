#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <doctest.h>
#include <json.hpp>

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const int rc = std::system((std::string(ACOPF_CLI) + " " + args + " 2>/dev/null").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("acopf_cli_" + name); }

const std::string kCase9Args = " --rho 1e3 --admm-max-iter 1e3 --admm-eps 1e-4 --sqp-tol 1e-4 --log-level quiet";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("missing case file") {
    CHECK(run("solve /nonexistent/case.m") == 1);
  }

  TEST_CASE("bad arguments") {
    CHECK(run("") == 1);
    CHECK(run("solve " + testutil::data("case9.m") + " --rho -1") == 1);
    CHECK(run("solve " + testutil::data("case9.m") + " --admm-max-iter 2.5") == 1);
    CHECK(run("solve " + testutil::data("case9.m") + " --log-level loud") == 1);
  }

  TEST_CASE("case9 report") {
    const auto out = tmp("case9.json");
    REQUIRE(run("solve " + testutil::data("case9.m") + kCase9Args + " -o " + out.string()) == 0);
    const auto j = read_json(out);
    CHECK(j["case"] == "case9.m");
    CHECK(j["status"] == "converged");
    CHECK(j["final"]["primal_infeas"].get<double>() <= 1e-4);
    CHECK(j["config"]["admm_max_iter"] == 1000);
    CHECK(j["iterations"].size() == j["final"]["sqp_iterations"].get<std::size_t>());
    for (const auto& it : j["iterations"]) {
      CHECK(it.contains("merit"));
      CHECK(it.contains("reject_reason"));
    }
    fs::remove(out);
  }

  TEST_CASE("single-threaded runs are reproducible") {
    const auto a = tmp("a.json"), b = tmp("b.json");
    const std::string base = "solve " + testutil::data("case9.m") + kCase9Args + " --threads 1 -o ";
    REQUIRE(run(base + a.string()) == 0);
    REQUIRE(run(base + b.string()) == 0);
    auto ja = read_json(a), jb = read_json(b);
    ja["final"].erase("wall_time_s");
    jb["final"].erase("wall_time_s");
    CHECK(ja.dump() == jb.dump());
    fs::remove(a);
    fs::remove(b);
  }

  TEST_CASE("thread count from the environment") {
    const auto out = tmp("env.json");
    CHECK(run("solve " + testutil::data("case9.m") + kCase9Args + " -o " + out.string()) == 0);
    const std::string cmd = "ACOPF_THREADS=2 " + std::string(ACOPF_CLI) + " solve " + testutil::data("case9.m") +
                            kCase9Args + " -o " + out.string() + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    CHECK(read_json(out)["config"]["threads"] == 2);
    const std::string bad = "ACOPF_THREADS=zero " + std::string(ACOPF_CLI) + " solve " + testutil::data("case9.m") +
                            kCase9Args + " 2>/dev/null >/dev/null";
    CHECK(WEXITSTATUS(std::system(bad.c_str())) == 1);
    fs::remove(out);
  }
}
