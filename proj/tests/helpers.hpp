#pragma once

#include <complex>
#include <utility>

#include "gridse/measurement.hpp"
#include "gridse/network.hpp"
#include "gridse/rng.hpp"

namespace testutil {

using gridse::Bus;
using gridse::BusKind;
using gridse::Line;
using gridse::Network;
using gridse::Rng;
using gridse::StateVector;

inline Network two_bus() {
  return Network({{1, BusKind::Slack, 0.0}, {2, BusKind::PQ, 0.0}},
                 {{1, 2, 1.0, -10.0, 0.0}});
}

inline Network six_bus() {
  std::vector<Bus> buses = {
      {1, BusKind::Slack, 0.0}, {2, BusKind::PV, 0.0},  {3, BusKind::PQ, 0.0},
      {4, BusKind::PQ, 0.05},   {5, BusKind::PQ, 0.0},  {6, BusKind::PQ, 0.0},
  };
  std::vector<Line> lines = {
      {1, 2, 1.2, -4.8, 0.04}, {2, 3, 0.9, -3.9, 0.03}, {3, 4, 1.1, -4.2, 0.02},
      {4, 5, 0.8, -3.1, 0.05}, {5, 6, 1.0, -4.5, 0.03}, {6, 1, 1.3, -5.2, 0.04},
      {1, 4, 0.7, -2.9, 0.02}, {2, 5, 0.6, -2.4, 0.03},
  };
  return Network(std::move(buses), std::move(lines));
}

inline StateVector random_state(long n, Rng& rng, double spread = 0.1) {
  StateVector v = StateVector::flat(n);
  for (long i = 0; i < n; ++i) {
    v.vr(i) += rng.uniform(-spread, spread);
    v.vi(i) += rng.uniform(-spread, spread);
  }
  return v;
}

// Injection computed directly from the line list, independent of the
// Y-bus assembly under test.
inline std::pair<double, double> oracle_injection(const Network& net,
                                                  const StateVector& v, int bus_id) {
  const long n = net.bus_index(bus_id);
  std::complex<double> vn(v.vr(n), v.vi(n));
  std::complex<double> current(0.0, 0.0);
  for (const Line& l : net.lines()) {
    const long a = net.bus_index(l.from);
    const long b = net.bus_index(l.to);
    const std::complex<double> y(l.g, l.b);
    const std::complex<double> hc(0.0, l.charging / 2.0);
    const std::complex<double> va(v.vr(a), v.vi(a));
    const std::complex<double> vb(v.vr(b), v.vi(b));
    if (a == n) current += y * (va - vb) + hc * va;
    if (b == n) current += y * (vb - va) + hc * vb;
  }
  current += std::complex<double>(0.0, net.buses()[static_cast<std::size_t>(n)].shunt_b) * vn;
  const std::complex<double> s = std::conj(vn) * current;
  return {s.real(), s.imag()};
}

inline std::pair<double, double> oracle_flow(const Network& net, const StateVector& v,
                                             long line_index, bool forward) {
  const Line& l = net.lines()[static_cast<std::size_t>(line_index)];
  const long a = net.bus_index(l.from);
  const long b = net.bus_index(l.to);
  const std::complex<double> y(l.g, l.b);
  const std::complex<double> hc(0.0, l.charging / 2.0);
  const std::complex<double> va(v.vr(a), v.vi(a));
  const std::complex<double> vb(v.vr(b), v.vi(b));
  const std::complex<double> s = forward ? std::conj(va) * (y * (va - vb) + hc * va)
                                         : std::conj(vb) * (y * (vb - va) + hc * vb);
  return {s.real(), s.imag()};
}

// Direct evaluation of the measurement a spec describes, bypassing the
// quadratic-form machinery.
inline double oracle_measurement(const Network& net, const StateVector& v,
                                 const gridse::MeasurementSpec& spec) {
  using gridse::MeasurementType;
  switch (spec.type) {
    case MeasurementType::VmagSq: {
      const long n = net.bus_index(spec.location);
      return v.vr(n) * v.vr(n) + v.vi(n) * v.vi(n);
    }
    case MeasurementType::PInj: return oracle_injection(net, v, spec.location).first;
    case MeasurementType::QInj: return oracle_injection(net, v, spec.location).second;
    case MeasurementType::PFlowFwd: return oracle_flow(net, v, spec.location - 1, true).first;
    case MeasurementType::QFlowFwd: return oracle_flow(net, v, spec.location - 1, true).second;
    case MeasurementType::PFlowTerm: return oracle_flow(net, v, spec.location - 1, false).first;
    case MeasurementType::QFlowTerm: return oracle_flow(net, v, spec.location - 1, false).second;
  }
  return 0.0;
}

}  // namespace testutil
