#include <doctest.h>

#include <filesystem>

#include "gridse/network.hpp"
#include "helpers.hpp"

using namespace gridse;
using namespace testutil;

TEST_CASE("ybus of the 2-bus line y = 1 - j10") {
  Network net = two_bus();
  const Eigen::MatrixXcd& y = net.ybus();
  CHECK(y(0, 0) == std::complex<double>(1.0, -10.0));
  CHECK(y(1, 1) == std::complex<double>(1.0, -10.0));
  CHECK(y(0, 1) == std::complex<double>(-1.0, 10.0));
  CHECK(y(1, 0) == std::complex<double>(-1.0, 10.0));
}

TEST_CASE("ybus of a single bus with a shunt") {
  Network net({{1, BusKind::Slack, 0.5}}, {});
  CHECK(net.ybus()(0, 0) == std::complex<double>(0.0, 0.5));
}

TEST_CASE("ybus matches per-entry brute-force summation on the 14-bus case") {
  Network net = Network::load(std::string(GRIDSE_DATA_DIR) + "/case14");
  const long n = net.bus_count();
  Eigen::MatrixXcd oracle = Eigen::MatrixXcd::Zero(n, n);
  for (long i = 0; i < n; ++i)
    oracle(i, i) += std::complex<double>(0.0, net.buses()[static_cast<std::size_t>(i)].shunt_b);
  for (const Line& l : net.lines()) {
    const long a = l.from - 1, b = l.to - 1;
    oracle(a, a) += std::complex<double>(l.g, l.b + l.charging / 2.0);
    oracle(b, b) += std::complex<double>(l.g, l.b + l.charging / 2.0);
    oracle(a, b) -= std::complex<double>(l.g, l.b);
    oracle(b, a) -= std::complex<double>(l.g, l.b);
  }
  CHECK((net.ybus() - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ybus is exactly symmetric") {
  Network net = six_bus();
  CHECK((net.ybus() - net.ybus().transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("network invariants are enforced") {
  CHECK_THROWS_WITH(Network({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0},
                             {3, BusKind::PQ, 0.0}},
                            {{1, 2, 1.0, -5.0, 0.0}}),
                    doctest::Contains("not connected"));
  CHECK_THROWS(Network({{1, BusKind::PQ, 0.0}}, {}));            // no slack
  CHECK_THROWS(Network({{1, BusKind::Slack, 0.0}, {3, BusKind::PQ, 0.0}},
                       {{1, 3, 1.0, -5.0, 0.0}}));               // gap in ids
  CHECK_THROWS(Network({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0}},
                       {{1, 1, 1.0, -5.0, 0.0}}));               // self loop
  CHECK_THROWS(Network({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0}},
                       {{1, 2, 0.0, 0.0, 0.0}}));                // dead line
}

TEST_CASE("flat state with no shunts or charging gives zero injections and flows") {
  Network net({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0}, {3, BusKind::PQ, 0.0}},
              {{1, 2, 1.0, -8.0, 0.0}, {2, 3, 0.5, -4.0, 0.0}});
  StateVector flat = StateVector::flat(3);
  for (const Bus& b : net.buses()) {
    auto [p, q] = power_injection(net, flat, b.id);
    CHECK(p == 0.0);
    CHECK(q == 0.0);
  }
  for (long li = 0; li < net.line_count(); ++li) {
    auto [pf, qf] = line_flow(net, flat, li, LineEnd::Forward);
    auto [pt, qt] = line_flow(net, flat, li, LineEnd::Terminal);
    CHECK(pf == 0.0);
    CHECK(qf == 0.0);
    CHECK(pt == 0.0);
    CHECK(qt == 0.0);
  }
}

TEST_CASE("one-bus shunt reads Q = |V|^2 b" * doctest::description("sign convention")) {
  Network net({{1, BusKind::Slack, 1.0}}, {});
  auto [p, q] = power_injection(net, StateVector::flat(1), 1);
  CHECK(p == doctest::Approx(0.0));
  CHECK(q == doctest::Approx(1.0));
}

TEST_CASE("random 6-bus injections match the direct complex oracle") {
  Network net = six_bus();
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    StateVector v = random_state(6, rng);
    for (const Bus& b : net.buses()) {
      auto [p, q] = power_injection(net, v, b.id);
      auto [op, oq] = oracle_injection(net, v, b.id);
      CHECK(p == doctest::Approx(op).epsilon(1e-12));
      CHECK(q == doctest::Approx(oq).epsilon(1e-12));
    }
  }
}

TEST_CASE("2-bus forward flow matches hand complex arithmetic") {
  Network net = two_bus();
  StateVector v;
  v.vr = Eigen::Vector2d(1.0, 0.97);
  v.vi = Eigen::Vector2d(0.0, -0.04);
  // I = y (V1 - V2); S = conj(V1) I with V1 = 1
  const std::complex<double> y(1.0, -10.0);
  const std::complex<double> s = y * (std::complex<double>(1.0, 0.0) -
                                      std::complex<double>(0.97, -0.04));
  auto [p, q] = line_flow(net, v, 0, LineEnd::Forward);
  CHECK(p == doctest::Approx(s.real()).epsilon(1e-14));
  CHECK(q == doctest::Approx(s.imag()).epsilon(1e-14));
}

TEST_CASE("lossless line conserves active power end to end") {
  Network net({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0}},
              {{1, 2, 0.0, -12.0, 0.06}});
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    StateVector v = random_state(2, rng);
    auto [pf, qf] = line_flow(net, v, 0, LineEnd::Forward);
    auto [pt, qt] = line_flow(net, v, 0, LineEnd::Terminal);
    (void)qf;
    (void)qt;
    CHECK(pf == doctest::Approx(-pt).epsilon(1e-12));
  }
}

TEST_CASE("total injection equals total line loss on random states") {
  Network net = six_bus();
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    StateVector v = random_state(6, rng);
    double injections = 0.0;
    for (const Bus& b : net.buses()) injections += power_injection(net, v, b.id).first;
    double losses = 0.0;
    for (long li = 0; li < net.line_count(); ++li) {
      losses += line_flow(net, v, li, LineEnd::Forward).first;
      losses += line_flow(net, v, li, LineEnd::Terminal).first;
    }
    CHECK(injections == doctest::Approx(losses).epsilon(1e-10));
  }
}

TEST_CASE("network CSV round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gridse_net_roundtrip";
  fs::create_directories(dir);
  Network net = six_bus();
  net.save(dir.string());
  Network back = Network::load(dir.string());
  CHECK(back.bus_count() == net.bus_count());
  CHECK(back.line_count() == net.line_count());
  CHECK((back.ybus() - net.ybus()).cwiseAbs().maxCoeff() == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("bundled cases load and are well formed") {
  for (const char* name : {"case2", "case6", "case14", "case118"}) {
    Network net = Network::load(std::string(GRIDSE_DATA_DIR) + "/" + name);
    CHECK(net.bus_count() > 0);
    CHECK((net.ybus() - net.ybus().transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}
