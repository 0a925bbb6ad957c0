#include <doctest.h>

#include <filesystem>

#include "gridse/powerflow.hpp"
#include "helpers.hpp"

using namespace gridse;
using namespace testutil;

namespace {

Network case14() { return Network::load(std::string(GRIDSE_DATA_DIR) + "/case14"); }

}  // namespace

TEST_CASE("zero injections from a 1.0 slack give the flat state exactly") {
  Network net({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0}, {3, BusKind::PQ, 0.0}},
              {{1, 2, 1.0, -8.0, 0.0}, {2, 3, 0.5, -4.0, 0.0}});
  InjectionTargets tg;
  tg.p = Eigen::VectorXd::Zero(3);
  tg.q = Eigen::VectorXd::Zero(3);
  tg.vset = Eigen::VectorXd::Ones(3);
  StateVector v = solve_powerflow(net, tg);
  CHECK(v.vr == Eigen::VectorXd::Ones(3));
  CHECK(v.vi == Eigen::VectorXd::Zero(3));
}

TEST_CASE("2-bus solution reproduces its specified injections") {
  Network net = two_bus();
  InjectionTargets tg;
  tg.p = Eigen::VectorXd::Zero(2);
  tg.q = Eigen::VectorXd::Zero(2);
  tg.vset = Eigen::VectorXd::Ones(2);
  tg.p(1) = -0.3;  // load of 0.3 + j0.1 at bus 2, library convention
  tg.q(1) = 0.1;
  StateVector v = solve_powerflow(net, tg);
  auto [p, q] = power_injection(net, v, 2);
  CHECK(p == doctest::Approx(-0.3).epsilon(1e-10));
  CHECK(q == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(std::hypot(v.vr(0), v.vi(0)) == doctest::Approx(1.0));
}

TEST_CASE("load beyond loadability raises an error instead of NaN") {
  Network net({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0}},
              {{1, 2, 0.2, -2.0, 0.0}});  // weak line
  InjectionTargets tg;
  tg.p = Eigen::VectorXd::Zero(2);
  tg.q = Eigen::VectorXd::Zero(2);
  tg.vset = Eigen::VectorXd::Ones(2);
  tg.p(1) = -5.0;  // far beyond what the line can carry
  CHECK_THROWS_AS(solve_powerflow(net, tg), PowerFlowError);
  try {
    solve_powerflow(net, tg);
  } catch (const PowerFlowError& e) {
    CHECK(std::isfinite(e.mismatch));
    CHECK(e.mismatch > 0.0);
  }
}

TEST_CASE("newton converges fast and decays superlinearly on the 14-bus case") {
  Network net = case14();
  LoadScenario sc = builtin_scenario("constant", net, 1, 0);
  std::vector<double> trace;
  StateVector v = solve_powerflow(net, targets_for_slot(net, sc, 0), {}, &trace);
  CHECK(v.vr.allFinite());
  REQUIRE(trace.size() >= 3);
  CHECK(trace.size() <= 8);  // flat start on a mild case
  // quadratic-flavoured tail: inside the basin one step at least squares
  // the mismatch up to a moderate constant
  const double r0 = trace[trace.size() - 3];
  const double r1 = trace[trace.size() - 2];
  CHECK(r1 <= 100.0 * r0 * r0);
}

TEST_CASE("constant scenario yields identical states at every slot") {
  Network net = six_bus();
  LoadScenario sc = builtin_scenario("constant", net, 5, 3);
  TimeSeriesData data = generate_timeseries(net, sc, full_plan(net), 3, false);
  REQUIRE(data.states.size() == 5);
  for (std::size_t t = 1; t < 5; ++t) {
    CHECK(data.states[t].vr == data.states[0].vr);
    CHECK(data.states[t].vi == data.states[0].vi);
  }
}

TEST_CASE("daily sine on the 14-bus case stays inside normal voltage bounds") {
  Network net = case14();
  LoadScenario sc = builtin_scenario("daily_sine", net, 48, 0);
  TimeSeriesData data = generate_timeseries(net, sc, {}, 0, false);
  for (const StateVector& v : data.states) {
    for (long n = 0; n < v.buses(); ++n) {
      const double mag = std::hypot(v.vr(n), v.vi(n));
      CHECK(mag > 0.9);
      CHECK(mag < 1.1);
    }
  }
}

TEST_CASE("generate_timeseries is bit-reproducible per seed") {
  Network net = six_bus();
  LoadScenario sc = builtin_scenario("daily_sine_noisy", net, 12, 5);
  const auto plan = full_plan(net);
  TimeSeriesData a = generate_timeseries(net, sc, plan, 5, true);
  TimeSeriesData b = generate_timeseries(net, sc, plan, 5, true);
  for (std::size_t t = 0; t < a.states.size(); ++t) {
    CHECK(a.states[t].vr == b.states[t].vr);
    CHECK(a.states[t].vi == b.states[t].vi);
    CHECK(a.measurements[t].z == b.measurements[t].z);
  }
}

TEST_CASE("non-convergence error names the failing slot") {
  Network net({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0}},
              {{1, 2, 0.2, -2.0, 0.0}});
  LoadScenario sc = builtin_scenario("constant", net, 3, 0);
  sc.p_demand(1, 0) = 40.0;  // break slot 1 only
  try {
    generate_timeseries(net, sc, {}, 0, false);
    FAIL("expected PowerFlowError");
  } catch (const PowerFlowError& e) {
    CHECK(std::string(e.what()).find("slot 1") != std::string::npos);
  }
}

TEST_CASE("builtin scenario profiles") {
  Network net = six_bus();

  SUBCASE("constant rows are identical") {
    LoadScenario sc = builtin_scenario("constant", net, 5, 1);
    for (long t = 1; t < 5; ++t) {
      CHECK(sc.p_demand.row(t) == sc.p_demand.row(0));
      CHECK(sc.q_demand.row(t) == sc.q_demand.row(0));
    }
  }

  SUBCASE("daily sine peak-to-trough ratio is exactly 1.5 over one day") {
    LoadScenario sc = builtin_scenario("daily_sine", net, 24, 1);
    const double hi = sc.p_demand.col(0).maxCoeff();
    const double lo = sc.p_demand.col(0).minCoeff();
    CHECK(hi / lo == doctest::Approx(1.5).epsilon(1e-12));
  }

  SUBCASE("noisy variant stays within 3x the 2% noise band") {
    LoadScenario clean = builtin_scenario("daily_sine", net, 10000, 2);
    LoadScenario noisy = builtin_scenario("daily_sine_noisy", net, 10000, 2);
    double max_rel = 0.0;
    for (long t = 0; t < clean.T; ++t)
      for (long j = 0; j < clean.p_demand.cols(); ++j)
        max_rel = std::max(max_rel,
                           std::abs(noisy.p_demand(t, j) / clean.p_demand(t, j) - 1.0));
    CHECK(max_rel <= 0.06);
    CHECK(max_rel > 0.005);  // noise is actually present
  }

  SUBCASE("unknown profile name is rejected") {
    CHECK_THROWS(builtin_scenario("weekly", net, 5, 1));
  }
}

TEST_CASE("scenario CSV round trip preserves the demand series") {
  namespace fs = std::filesystem;
  Network net = six_bus();
  LoadScenario sc = builtin_scenario("daily_sine", net, 6, 4);
  const auto path = (fs::temp_directory_path() / "gridse_scenario.csv").string();
  save_scenario(path, sc);
  LoadScenario back = load_scenario(path, net);
  CHECK(back.T == sc.T);
  CHECK((back.p_demand - sc.p_demand).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.q_demand - sc.q_demand).cwiseAbs().maxCoeff() == 0.0);
  fs::remove(path);
}

TEST_CASE("118-bus case solves the nominal scenario") {
  Network net = Network::load(std::string(GRIDSE_DATA_DIR) + "/case118");
  LoadScenario sc = builtin_scenario("daily_sine", net, 2, 0);
  TimeSeriesData data = generate_timeseries(net, sc, {}, 0, false);
  CHECK(data.states.size() == 2);
  for (long n = 0; n < net.bus_count(); ++n) {
    const double mag = std::hypot(data.states[0].vr(n), data.states[0].vi(n));
    CHECK(mag > 0.85);
    CHECK(mag < 1.15);
  }
}
