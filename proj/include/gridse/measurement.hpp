#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gridse/network.hpp"

namespace gridse {

/// The seven SCADA quantity families carried by a measurement vector:
/// squared voltage magnitude, nodal P/Q injection, and P/Q branch flow at
/// either end.
enum class MeasurementType {
  VmagSq,
  PInj,
  QInj,
  PFlowFwd,
  QFlowFwd,
  PFlowTerm,
  QFlowTerm,
};

std::string measurement_type_name(MeasurementType t);
MeasurementType measurement_type_from_name(const std::string& s);
bool is_bus_measurement(MeasurementType t);

struct MeasurementSpec {
  MeasurementType type = MeasurementType::VmagSq;
  int location = 1;     // 1-based bus id, or 1-based line index for flows
  double sigma = 0.01;  // noise standard deviation, per-unit
};

/// Sparse symmetric 2N x 2N matrix H with z = x' H x for the packed
/// rectangular state x. Both triangles are stored explicitly.
class QuadraticForm {
 public:
  struct Entry {
    int row;
    int col;
    double value;
  };

  QuadraticForm() = default;
  QuadraticForm(long dim, std::vector<Entry> entries);

  long dim() const { return dim_; }
  const std::vector<Entry>& entries() const { return entries_; }

  double evaluate(const Eigen::VectorXd& x) const;
  /// Gradient of x' H x, i.e. 2 H x.
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd dense() const;

 private:
  long dim_ = 0;
  std::vector<Entry> entries_;
};

struct MeasurementSet {
  std::vector<MeasurementSpec> specs;
  Eigen::VectorXd z;
  long t = 0;

  long size() const { return z.size(); }
};

enum class ErrorClass { Normal, Gross, Extreme };

/// Builds H for one measurement so that x' H x reproduces the network
/// evaluation of that quantity exactly. The bilinear construction is
/// symmetrized as (A + A')/2.
QuadraticForm build_quadratic_form(const Network& net, const MeasurementSpec& spec);
std::vector<QuadraticForm> build_forms(const Network& net,
                                       const std::vector<MeasurementSpec>& specs);

/// z_m = x' H_m x + e_m with e_m ~ Normal(0, sigma_m^2) from the seed;
/// with_noise=false gives the exact evaluations.
MeasurementSet simulate_measurements(const Network& net, const StateVector& v,
                                     const std::vector<MeasurementSpec>& specs,
                                     std::uint64_t seed, bool with_noise = true);

/// Residual classes: |r| < 5s Normal, 5s <= |r| <= 20s Gross, beyond Extreme.
/// Both boundaries belong to Gross. sigma must be positive.
ErrorClass classify_error(double residual, double sigma);

using TypeLimits = std::map<MeasurementType, std::pair<double, double>>;

struct PrefilterResult {
  MeasurementSet kept;
  std::vector<long> rejected;  // indices into the input set, ascending
};

/// Limit check: entries outside [min, max] for their type are dropped,
/// survivor order preserved. Limits must cover every type present.
PrefilterResult prefilter(const MeasurementSet& ms, const TypeLimits& limits);

struct ObservabilityReport {
  bool observable = false;
  long rank = 0;
};

/// Numerical rank of the stacked measurement Jacobian at flat start with
/// the slack imaginary-part column removed; observable iff rank = 2N - 1.
ObservabilityReport observability_check(const Network& net,
                                        const std::vector<MeasurementSpec>& specs);

/// All seven types at every bus/line. Default sigmas: 0.004 for squared
/// voltage magnitudes, 0.01 for power quantities.
std::vector<MeasurementSpec> full_plan(const Network& net, double sigma_power = 0.01,
                                       double sigma_vmag = 0.004);

/// Deterministic round-robin thinning across the seven type families
/// until `target` specs are selected.
std::vector<MeasurementSpec> thin_plan(const std::vector<MeasurementSpec>& plan,
                                       long target);

std::vector<MeasurementSpec> load_plan(const std::string& path);
void save_plan(const std::string& path, const std::vector<MeasurementSpec>& specs);

MeasurementSet load_measurement_set(const std::string& path);
void save_measurement_set(const std::string& path, const MeasurementSet& ms);

}  // namespace gridse
