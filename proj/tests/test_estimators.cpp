#include <doctest.h>

#include <algorithm>

#include "gridse/estimators.hpp"
#include "gridse/powerflow.hpp"
#include "helpers.hpp"

using namespace gridse;
using namespace testutil;

namespace {

Network case14() { return Network::load(std::string(GRIDSE_DATA_DIR) + "/case14"); }

StateVector solved_state(const Network& net, std::uint64_t seed) {
  LoadScenario sc = builtin_scenario("daily_sine_noisy", net, 3, seed);
  return solve_powerflow(net, targets_for_slot(net, sc, 1));
}

double state_rmse(const StateVector& a, const StateVector& b) {
  const double sq = (a.vr - b.vr).squaredNorm() + (a.vi - b.vi).squaredNorm();
  return std::sqrt(sq / static_cast<double>(2 * a.buses()));
}

}  // namespace

TEST_CASE("WLS recovers the exact state from noise-free measurements") {
  Network net = case14();
  const StateVector truth = solved_state(net, 17);
  const auto plan = full_plan(net);
  const auto forms = build_forms(net, plan);
  const MeasurementSet ms = simulate_measurements(net, truth, plan, 17, false);

  EstimateReport rep = wls_gauss_newton(ms, forms, net);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 10);
  CHECK((rep.v_hat.vr - truth.vr).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((rep.v_hat.vi - truth.vi).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("WLS started at the optimum stops immediately") {
  Network net = six_bus();
  const StateVector truth = solved_state(net, 3);
  const auto plan = full_plan(net);
  const MeasurementSet ms = simulate_measurements(net, truth, plan, 3, false);
  EstimatorOptions opts;
  opts.init = truth;
  EstimateReport rep = wls_gauss_newton(ms, build_forms(net, plan), net, opts);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 1);
  CHECK((rep.v_hat.vr - truth.vr).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("unobservable measurement sets are rejected") {
  Network net = six_bus();
  std::vector<MeasurementSpec> plan = {{MeasurementType::VmagSq, 1, 0.004},
                                       {MeasurementType::VmagSq, 2, 0.004}};
  MeasurementSet ms = simulate_measurements(net, StateVector::flat(6), plan, 0, false);
  CHECK_THROWS_WITH(wls_gauss_newton(ms, build_forms(net, plan), net),
                    doctest::Contains("unobservable"));
}

TEST_CASE("LAV recovers the exact state from noise-free measurements") {
  Network net = case14();
  const StateVector truth = solved_state(net, 23);
  const auto plan = full_plan(net);
  const MeasurementSet ms = simulate_measurements(net, truth, plan, 23, false);
  EstimateReport rep = lav_prox_linear(ms, build_forms(net, plan), net);
  CHECK((rep.v_hat.vr - truth.vr).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((rep.v_hat.vi - truth.vi).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("LAV solves the scalar 1-bus magnitude problem") {
  // one bus, one measurement |V|^2 = 1.21: the LAV objective over the free
  // variable vr is |1.21 - vr^2|, minimised at vr = 1.1 (grid-search oracle)
  Network net({{1, BusKind::Slack, 0.0}}, {});
  std::vector<MeasurementSpec> plan = {{MeasurementType::VmagSq, 1, 0.004}};
  MeasurementSet ms;
  ms.specs = plan;
  ms.z.resize(1);
  ms.z(0) = 1.21;

  double best_vr = 0.0, best_obj = 1e300;
  for (double vr = 0.5; vr <= 2.0; vr += 1e-6) {
    const double obj = std::abs(1.21 - vr * vr);
    if (obj < best_obj) {
      best_obj = obj;
      best_vr = vr;
    }
  }
  CHECK(best_vr == doctest::Approx(1.1).epsilon(1e-5));

  EstimateReport rep = lav_prox_linear(ms, build_forms(net, plan), net);
  const double mag_sq = rep.v_hat.vr(0) * rep.v_hat.vr(0) + rep.v_hat.vi(0) * rep.v_hat.vi(0);
  CHECK(mag_sq == doctest::Approx(1.21).epsilon(1e-6));
  CHECK(rep.v_hat.vr(0) == doctest::Approx(best_vr).epsilon(1e-4));
}

TEST_CASE("LAV beats WLS under a single gross error (paired seeds)") {
  Network net = case14();
  const auto plan = full_plan(net);
  const auto forms = build_forms(net, plan);
  int lav_wins = 0, ties_or_wins = 0;
  const int trials = 20;
  std::vector<double> lav_rmse, wls_rmse;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(trial);
    const StateVector truth = solved_state(net, seed);
    MeasurementSet ms = simulate_measurements(net, truth, plan, seed, true);
    Rng pick(seed);
    const long victim = static_cast<long>(pick.index_below(static_cast<std::size_t>(ms.size())));
    ms.z(victim) += 10.0 * ms.specs[static_cast<std::size_t>(victim)].sigma;

    const EstimateReport wls = wls_gauss_newton(ms, forms, net);
    const EstimateReport lav = lav_prox_linear(ms, forms, net);
    const double we = state_rmse(wls.v_hat, truth);
    const double le = state_rmse(lav.v_hat, truth);
    wls_rmse.push_back(we);
    lav_rmse.push_back(le);
    if (le < we) ++lav_wins;
    if (le <= we) ++ties_or_wins;
  }
  std::sort(wls_rmse.begin(), wls_rmse.end());
  std::sort(lav_rmse.begin(), lav_rmse.end());
  CHECK(lav_rmse[trials / 2] < wls_rmse[trials / 2]);  // median strictly better
  CHECK(ties_or_wins * 10 >= trials * 9);              // >= 90% of trials
}

TEST_CASE("objective traces never increase") {
  Network net = six_bus();
  const auto plan = full_plan(net);
  const auto forms = build_forms(net, plan);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const StateVector truth = solved_state(net, seed);
    MeasurementSet ms = simulate_measurements(net, truth, plan, seed, true);
    const EstimateReport wls = wls_gauss_newton(ms, forms, net);
    for (std::size_t i = 1; i < wls.objective_trace.size(); ++i)
      CHECK(wls.objective_trace[i] <= wls.objective_trace[i - 1]);
    const EstimateReport lav = lav_prox_linear(ms, forms, net);
    for (std::size_t i = 1; i < lav.objective_trace.size(); ++i)
      CHECK(lav.objective_trace[i] <= lav.objective_trace[i - 1]);
  }
}

TEST_CASE("estimators are invariant to measurement ordering") {
  Network net = six_bus();
  const StateVector truth = solved_state(net, 11);
  std::vector<MeasurementSpec> plan = full_plan(net);
  MeasurementSet ms = simulate_measurements(net, truth, plan, 11, true);

  // jointly permute (z, specs) with a fixed derangement-ish shuffle
  std::vector<long> perm(static_cast<std::size_t>(ms.size()));
  for (long i = 0; i < ms.size(); ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(77);
  shuffle(perm, rng);
  MeasurementSet permuted;
  permuted.t = ms.t;
  permuted.z.resize(ms.size());
  for (long i = 0; i < ms.size(); ++i) {
    permuted.specs.push_back(ms.specs[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    permuted.z(i) = ms.z(perm[static_cast<std::size_t>(i)]);
  }

  const auto forms = build_forms(net, ms.specs);
  const auto forms_p = build_forms(net, permuted.specs);
  const EstimateReport a = wls_gauss_newton(ms, forms, net);
  const EstimateReport b = wls_gauss_newton(permuted, forms_p, net);
  CHECK((a.v_hat.vr - b.v_hat.vr).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.v_hat.vi - b.v_hat.vi).cwiseAbs().maxCoeff() < 1e-12);

  const EstimateReport la = lav_prox_linear(ms, forms, net);
  const EstimateReport lb = lav_prox_linear(permuted, forms_p, net);
  CHECK((la.v_hat.vr - lb.v_hat.vr).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((la.v_hat.vi - lb.v_hat.vi).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero-noise fixed point holds for both solvers") {
  Network net = six_bus();
  const StateVector truth = solved_state(net, 29);
  const auto plan = full_plan(net);
  const MeasurementSet ms = simulate_measurements(net, truth, plan, 29, false);
  const auto forms = build_forms(net, plan);
  EstimatorOptions opts;
  opts.init = truth;
  const EstimateReport w = wls_gauss_newton(ms, forms, net, opts);
  CHECK((w.v_hat.vr - truth.vr).cwiseAbs().maxCoeff() < 1e-12);
  const EstimateReport l = lav_prox_linear(ms, forms, net, opts);
  CHECK((l.v_hat.vr - truth.vr).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bad data loop leaves clean data alone") {
  Network net = case14();
  const StateVector truth = solved_state(net, 41);
  const auto plan = full_plan(net);
  MeasurementSet ms = simulate_measurements(net, truth, plan, 41, true);
  BadDataResult res = bad_data_loop(ms, build_forms(net, plan), net);
  CHECK(res.removed.empty());
  CHECK(res.flagged.empty());
}

TEST_CASE("bad data loop removes a single 12-sigma corruption") {
  Network net = case14();
  const auto plan = full_plan(net);
  const auto forms = build_forms(net, plan);
  const StateVector truth = solved_state(net, 43);
  MeasurementSet ms = simulate_measurements(net, truth, plan, 43, true);
  const long victim = 30;
  ms.z(victim) += 12.0 * ms.specs[victim].sigma;

  BadDataResult res = bad_data_loop(ms, forms, net);
  REQUIRE(res.removed.size() == 1);
  CHECK(res.removed[0] == victim);
  CHECK(res.flagged.empty());
  for (long m = 0; m < res.report.residuals.size(); ++m)
    CHECK(classify_error(res.report.residuals(m),
                         0.01 /* all survivors in this plan slice have sigma <= 0.01 */) !=
          ErrorClass::Extreme);
}

TEST_CASE("bad data loop guards critical measurements") {
  // minimally observable 2-bus plan; the impossible negative magnitude
  // cannot be fitted, and removing any row would break observability
  Network net = two_bus();
  std::vector<MeasurementSpec> plan = {{MeasurementType::VmagSq, 1, 0.004},
                                       {MeasurementType::PInj, 2, 0.01},
                                       {MeasurementType::QInj, 2, 0.01}};
  const StateVector truth = solved_state(net, 51);
  MeasurementSet ms = simulate_measurements(net, truth, plan, 51, false);
  ms.z(0) = -0.2;  // physically impossible squared magnitude

  BadDataResult res = bad_data_loop(ms, build_forms(net, plan), net);
  CHECK(res.removed.empty());
  CHECK_FALSE(res.flagged.empty());
  CHECK(std::find(res.flagged.begin(), res.flagged.end(), 0) != res.flagged.end());
}
