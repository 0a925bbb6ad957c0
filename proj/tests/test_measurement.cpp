#include <doctest.h>

#include <filesystem>
#include <set>

#include "gridse/measurement.hpp"
#include "helpers.hpp"

using namespace gridse;
using namespace testutil;

TEST_CASE("vmag_sq form has exactly two unit diagonal entries") {
  Network net = six_bus();
  QuadraticForm f = build_quadratic_form(net, {MeasurementType::VmagSq, 3, 0.004});
  REQUIRE(f.entries().size() == 2);
  CHECK(f.entries()[0].row == 4);  // packed index of vr_3
  CHECK(f.entries()[0].col == 4);
  CHECK(f.entries()[0].value == 1.0);
  CHECK(f.entries()[1].row == 5);
  CHECK(f.entries()[1].col == 5);
  CHECK(f.entries()[1].value == 1.0);
}

TEST_CASE("injection form of an isolated single-bus network is zero") {
  Network net({{1, BusKind::Slack, 0.0}}, {});
  QuadraticForm f = build_quadratic_form(net, {MeasurementType::PInj, 1, 0.01});
  CHECK(f.entries().empty());
  CHECK(f.evaluate(StateVector::flat(1).packed()) == 0.0);
}

TEST_CASE("all seven types agree with the direct oracle over random states") {
  for (const char* name : {"case2", "case6", "case14"}) {
    Network net = name == std::string("case2")
                      ? two_bus()
                      : Network::load(std::string(GRIDSE_DATA_DIR) + "/" + name);
    const std::vector<MeasurementSpec> plan = full_plan(net);
    const std::vector<QuadraticForm> forms = build_forms(net, plan);
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
      const StateVector v = random_state(net.bus_count(), rng);
      const Eigen::VectorXd x = v.packed();
      for (std::size_t m = 0; m < plan.size(); ++m) {
        const double via_form = forms[m].evaluate(x);
        const double direct = oracle_measurement(net, v, plan[m]);
        const double scale = std::max(1.0, std::abs(direct));
        CHECK(std::abs(via_form - direct) / scale < 1e-10);
      }
    }
  }
}

TEST_CASE("forms are exactly symmetric") {
  Network net = six_bus();
  for (const MeasurementSpec& spec : full_plan(net)) {
    const Eigen::MatrixXd h = build_quadratic_form(net, spec).dense();
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("evaluate matches a dense triple product") {
  Network net = six_bus();
  Rng rng(5);
  const std::vector<MeasurementSpec> plan = full_plan(net);
  for (int trial = 0; trial < 10; ++trial) {
    const MeasurementSpec& spec = plan[rng.index_below(plan.size())];
    const QuadraticForm f = build_quadratic_form(net, spec);
    const StateVector v = random_state(6, rng);
    const Eigen::VectorXd x = v.packed();
    const double dense_val = x.transpose() * f.dense() * x;
    CHECK(f.evaluate(x) == doctest::Approx(dense_val).epsilon(1e-12));
  }
}

TEST_CASE("evaluate of the zero form and the flat vmag form") {
  Network net({{1, BusKind::Slack, 0.0}}, {});
  QuadraticForm zero = build_quadratic_form(net, {MeasurementType::PInj, 1, 0.01});
  QuadraticForm vmag = build_quadratic_form(net, {MeasurementType::VmagSq, 1, 0.004});
  const Eigen::VectorXd flat = StateVector::flat(1).packed();
  CHECK(zero.evaluate(flat) == 0.0);
  CHECK(vmag.evaluate(flat) == 1.0);
}

TEST_CASE("gradient is 2Hx: flat vmag case and finite differences") {
  Network net = six_bus();
  const Eigen::VectorXd flat = StateVector::flat(6).packed();

  QuadraticForm vmag = build_quadratic_form(net, {MeasurementType::VmagSq, 2, 0.004});
  const Eigen::VectorXd g = vmag.gradient(flat);
  for (long i = 0; i < 12; ++i) CHECK(g(i) == (i == 2 ? 2.0 : 0.0));

  Rng rng(31);
  const std::vector<MeasurementSpec> plan = full_plan(net);
  const double step = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const MeasurementSpec& spec = plan[rng.index_below(plan.size())];
    const QuadraticForm f = build_quadratic_form(net, spec);
    Eigen::VectorXd x = random_state(6, rng).packed();
    const Eigen::VectorXd grad = f.gradient(x);
    for (long i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += step;
      xm(i) -= step;
      const double fd = (f.evaluate(xp) - f.evaluate(xm)) / (2.0 * step);
      const double scale = std::max(1.0, std::abs(fd));
      CHECK(std::abs(grad(i) - fd) / scale < 1e-6);
    }
  }
}

TEST_CASE("simulation is exact without noise and reproducible with it") {
  Network net = six_bus();
  const StateVector v = StateVector::flat(6);
  const std::vector<MeasurementSpec> plan = full_plan(net);

  MeasurementSet exact = simulate_measurements(net, v, plan, 7, false);
  const std::vector<QuadraticForm> forms = build_forms(net, plan);
  const Eigen::VectorXd x = v.packed();
  for (long m = 0; m < exact.size(); ++m)
    CHECK(exact.z(m) == forms[static_cast<std::size_t>(m)].evaluate(x));

  MeasurementSet a = simulate_measurements(net, v, plan, 7, true);
  MeasurementSet b = simulate_measurements(net, v, plan, 7, true);
  CHECK(a.z == b.z);
  MeasurementSet c = simulate_measurements(net, v, plan, 8, true);
  CHECK(a.z != c.z);
}

TEST_CASE("simulated noise has the configured spread") {
  Network net({{1, BusKind::Slack, 0.0}}, {});
  const StateVector v = StateVector::flat(1);
  std::vector<MeasurementSpec> plan(1, {MeasurementType::VmagSq, 1, 0.004});
  double sq_sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    MeasurementSet ms =
        simulate_measurements(net, v, plan, static_cast<std::uint64_t>(i), true);
    const double eps = ms.z(0) - 1.0;
    sq_sum += eps * eps;
  }
  const double sd = std::sqrt(sq_sum / draws);
  CHECK(sd == doctest::Approx(0.004).epsilon(0.02));
}

TEST_CASE("error classification thresholds") {
  CHECK(classify_error(0.3, 0.01) == ErrorClass::Extreme);  // 30 sigma
  CHECK(classify_error(0.07, 0.01) == ErrorClass::Gross);   // 7 sigma
  CHECK(classify_error(0.0, 0.5) == ErrorClass::Normal);
  CHECK(classify_error(-0.07, 0.01) == ErrorClass::Gross);  // sign-free

  for (double sigma : {0.004, 0.01, 1.0}) {
    CHECK(classify_error(4.999 * sigma, sigma) == ErrorClass::Normal);
    CHECK(classify_error(5.0 * sigma, sigma) == ErrorClass::Gross);
    CHECK(classify_error(20.0 * sigma, sigma) == ErrorClass::Gross);
    CHECK(classify_error(20.001 * sigma, sigma) == ErrorClass::Extreme);
  }
  CHECK_THROWS(classify_error(0.1, 0.0));
  CHECK_THROWS(classify_error(0.1, -1.0));
}

TEST_CASE("prefilter keeps in-range entries in order") {
  Network net = two_bus();
  const std::vector<MeasurementSpec> plan = full_plan(net);
  const StateVector v = StateVector::flat(2);
  MeasurementSet ms = simulate_measurements(net, v, plan, 3, false);

  TypeLimits limits;
  for (int t = 0; t < 7; ++t) limits[static_cast<MeasurementType>(t)] = {-2.0, 2.0};
  limits[MeasurementType::VmagSq] = {0.64, 1.44};

  SUBCASE("all within limits") {
    PrefilterResult res = prefilter(ms, limits);
    CHECK(res.rejected.empty());
    CHECK(res.kept.z == ms.z);
  }

  SUBCASE("impossible negative magnitude is rejected") {
    ms.z(0) = -0.2;
    PrefilterResult res = prefilter(ms, limits);
    REQUIRE(res.rejected.size() == 1);
    CHECK(res.rejected[0] == 0);
    CHECK(res.kept.size() == ms.size() - 1);
  }

  SUBCASE("exactly the out-of-range indices are dropped") {
    ms.z(1) = 5.0;
    ms.z(4) = -3.0;
    ms.z(7) = 2.5;
    PrefilterResult res = prefilter(ms, limits);
    CHECK(res.rejected == std::vector<long>{1, 4, 7});
    long kept_i = 0;
    for (long m = 0; m < ms.size(); ++m) {
      if (m == 1 || m == 4 || m == 7) continue;
      CHECK(res.kept.z(kept_i) == ms.z(m));
      ++kept_i;
    }
  }

  SUBCASE("missing limits for a present type is an error") {
    limits.erase(MeasurementType::QFlowTerm);
    CHECK_THROWS(prefilter(ms, limits));
  }
}

TEST_CASE("observability of the 6-bus network") {
  Network net = six_bus();

  SUBCASE("full plan observable, rank matches an independent SVD") {
    const std::vector<MeasurementSpec> plan = full_plan(net);
    ObservabilityReport rep = observability_check(net, plan);
    CHECK(rep.observable);
    CHECK(rep.rank == 11);

    // independent oracle: finite-difference Jacobian of the direct
    // measurement functions at flat start, slack-vi column removed
    const long dim = 12, pinned = 1;
    const double step = 1e-7;
    Eigen::MatrixXd jac(static_cast<long>(plan.size()), dim - 1);
    for (std::size_t m = 0; m < plan.size(); ++m) {
      long c = 0;
      for (long j = 0; j < dim; ++j) {
        if (j == pinned) continue;
        Eigen::VectorXd xp = StateVector::flat(6).packed();
        Eigen::VectorXd xm = xp;
        xp(j) += step;
        xm(j) -= step;
        jac(static_cast<long>(m), c++) =
            (oracle_measurement(net, StateVector::from_packed(xp), plan[m]) -
             oracle_measurement(net, StateVector::from_packed(xm), plan[m])) /
            (2.0 * step);
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    long oracle_rank = 0;
    for (long i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > 1e-6 * svd.singularValues()(0)) ++oracle_rank;
    CHECK(oracle_rank == rep.rank);
  }

  SUBCASE("one voltage magnitude is not observable") {
    ObservabilityReport rep =
        observability_check(net, {{MeasurementType::VmagSq, 1, 0.004}});
    CHECK_FALSE(rep.observable);
    CHECK(rep.rank == 1);
  }

  SUBCASE("duplicated rows do not increase rank") {
    std::vector<MeasurementSpec> plan = full_plan(net);
    const long rank_before = observability_check(net, plan).rank;
    std::vector<MeasurementSpec> doubled = plan;
    doubled.insert(doubled.end(), plan.begin(), plan.end());
    CHECK(observability_check(net, doubled).rank == rank_before);
  }
}

TEST_CASE("full plan covers everything; thinning is round-robin") {
  Network net = six_bus();
  const auto plan = full_plan(net);
  CHECK(plan.size() == static_cast<std::size_t>(3 * 6 + 4 * 8));
  const auto thin = thin_plan(plan, 11);
  CHECK(thin.size() == 11);
  std::set<MeasurementType> seen;
  for (const auto& s : thin) seen.insert(s.type);
  CHECK(seen.size() == 7);  // every family reached
  CHECK(thin_plan(plan, 1000).size() == plan.size());
}

TEST_CASE("plan and measurement-set CSV round trips") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gridse_meas_io";
  fs::create_directories(dir);
  Network net = six_bus();
  const auto plan = full_plan(net);
  save_plan((dir / "plan.csv").string(), plan);
  const auto plan2 = load_plan((dir / "plan.csv").string());
  REQUIRE(plan2.size() == plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    CHECK(plan2[i].type == plan[i].type);
    CHECK(plan2[i].location == plan[i].location);
    CHECK(plan2[i].sigma == plan[i].sigma);
  }

  MeasurementSet ms = simulate_measurements(net, StateVector::flat(6), plan, 11, true);
  ms.t = 42;
  save_measurement_set((dir / "ms.csv").string(), ms);
  MeasurementSet ms2 = load_measurement_set((dir / "ms.csv").string());
  CHECK(ms2.t == 42);
  CHECK(ms2.z == ms.z);
  fs::remove_all(dir);
}
