#include "gridse/measurement.hpp"

#include <algorithm>
#include <complex>
#include <stdexcept>

#include "gridse/csv.hpp"
#include "gridse/rng.hpp"

namespace gridse {

std::string measurement_type_name(MeasurementType t) {
  switch (t) {
    case MeasurementType::VmagSq: return "vmag_sq";
    case MeasurementType::PInj: return "p_inj";
    case MeasurementType::QInj: return "q_inj";
    case MeasurementType::PFlowFwd: return "pf_fwd";
    case MeasurementType::QFlowFwd: return "qf_fwd";
    case MeasurementType::PFlowTerm: return "pf_term";
    case MeasurementType::QFlowTerm: return "qf_term";
  }
  return "?";
}

MeasurementType measurement_type_from_name(const std::string& s) {
  if (s == "vmag_sq") return MeasurementType::VmagSq;
  if (s == "p_inj") return MeasurementType::PInj;
  if (s == "q_inj") return MeasurementType::QInj;
  if (s == "pf_fwd") return MeasurementType::PFlowFwd;
  if (s == "qf_fwd") return MeasurementType::QFlowFwd;
  if (s == "pf_term") return MeasurementType::PFlowTerm;
  if (s == "qf_term") return MeasurementType::QFlowTerm;
  throw std::runtime_error("unknown measurement type '" + s + "'");
}

bool is_bus_measurement(MeasurementType t) {
  return t == MeasurementType::VmagSq || t == MeasurementType::PInj ||
         t == MeasurementType::QInj;
}

QuadraticForm::QuadraticForm(long dim, std::vector<Entry> entries)
    : dim_(dim), entries_(std::move(entries)) {}

double QuadraticForm::evaluate(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw std::runtime_error("quadratic form: dimension mismatch");
  double acc = 0.0;
  for (const Entry& e : entries_) acc += e.value * x(e.row) * x(e.col);
  return acc;
}

Eigen::VectorXd QuadraticForm::gradient(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw std::runtime_error("quadratic form: dimension mismatch");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (const Entry& e : entries_) g(e.row) += e.value * x(e.col);
  return 2.0 * g;
}

Eigen::MatrixXd QuadraticForm::dense() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const Entry& e : entries_) h(e.row, e.col) += e.value;
  return h;
}

namespace {

// Accumulates the (possibly asymmetric) bilinear matrix A, then emits the
// symmetrized coordinate list for H = (A + A')/2.
class FormBuilder {
 public:
  explicit FormBuilder(long dim) : dim_(dim) {}

  void add(long row, long col, double v) {
    if (v != 0.0) acc_[{row, col}] += v;
  }

  QuadraticForm build() const {
    std::map<std::pair<long, long>, double> sym;
    for (const auto& [key, v] : acc_) {
      sym[key] += v / 2.0;
      sym[{key.second, key.first}] += v / 2.0;
    }
    std::vector<QuadraticForm::Entry> entries;
    entries.reserve(sym.size());
    for (const auto& [key, v] : sym) {
      if (v != 0.0)
        entries.push_back({static_cast<int>(key.first), static_cast<int>(key.second), v});
    }
    return QuadraticForm(dim_, std::move(entries));
  }

  // Adds the bilinear terms of Re or Im of conj(V_anchor) * sum_k C_k V_k
  // in the packed [vr_1, vi_1, ...] layout.
  void add_power_terms(long anchor, bool imaginary,
                       const std::vector<std::pair<long, std::complex<double>>>& coeffs) {
    const long ra = 2 * anchor, ia = 2 * anchor + 1;
    for (const auto& [k, c] : coeffs) {
      const long rk = 2 * k, ik = 2 * k + 1;
      if (!imaginary) {
        add(ra, rk, c.real());
        add(ra, ik, -c.imag());
        add(ia, ik, c.real());
        add(ia, rk, c.imag());
      } else {
        add(ra, ik, c.real());
        add(ra, rk, c.imag());
        add(ia, rk, -c.real());
        add(ia, ik, c.imag());
      }
    }
  }

 private:
  long dim_;
  std::map<std::pair<long, long>, double> acc_;
};

}  // namespace

QuadraticForm build_quadratic_form(const Network& net, const MeasurementSpec& spec) {
  const long n = net.bus_count();
  FormBuilder fb(2 * n);

  if (is_bus_measurement(spec.type)) {
    const long a = net.bus_index(spec.location);
    if (spec.type == MeasurementType::VmagSq) {
      fb.add(2 * a, 2 * a, 1.0);
      fb.add(2 * a + 1, 2 * a + 1, 1.0);
      return fb.build();
    }
    std::vector<std::pair<long, std::complex<double>>> coeffs;
    for (long k = 0; k < n; ++k) {
      const std::complex<double> y = net.ybus()(a, k);
      if (y != std::complex<double>(0.0, 0.0)) coeffs.emplace_back(k, y);
    }
    fb.add_power_terms(a, spec.type == MeasurementType::QInj, coeffs);
    return fb.build();
  }

  const long li = spec.location - 1;
  if (li < 0 || li >= net.line_count())
    throw std::runtime_error("measurement line index " + std::to_string(spec.location) +
                             " out of range");
  const Line& l = net.lines()[static_cast<std::size_t>(li)];
  const long a = net.bus_index(l.from);
  const long b = net.bus_index(l.to);
  const std::complex<double> y(l.g, l.b);
  const std::complex<double> half_charge(0.0, l.charging / 2.0);

  const bool forward = spec.type == MeasurementType::PFlowFwd ||
                       spec.type == MeasurementType::QFlowFwd;
  const bool imaginary = spec.type == MeasurementType::QFlowFwd ||
                         spec.type == MeasurementType::QFlowTerm;
  const long anchor = forward ? a : b;
  const long other = forward ? b : a;
  fb.add_power_terms(anchor, imaginary, {{anchor, y + half_charge}, {other, -y}});
  return fb.build();
}

std::vector<QuadraticForm> build_forms(const Network& net,
                                       const std::vector<MeasurementSpec>& specs) {
  std::vector<QuadraticForm> forms;
  forms.reserve(specs.size());
  for (const MeasurementSpec& s : specs) forms.push_back(build_quadratic_form(net, s));
  return forms;
}

MeasurementSet simulate_measurements(const Network& net, const StateVector& v,
                                     const std::vector<MeasurementSpec>& specs,
                                     std::uint64_t seed, bool with_noise) {
  MeasurementSet ms;
  ms.specs = specs;
  ms.z.resize(static_cast<long>(specs.size()));
  const Eigen::VectorXd x = v.packed();
  Rng rng(seed);
  for (std::size_t m = 0; m < specs.size(); ++m) {
    const double exact = build_quadratic_form(net, specs[m]).evaluate(x);
    const double noise = with_noise ? rng.normal(0.0, specs[m].sigma) : 0.0;
    ms.z(static_cast<long>(m)) = exact + noise;
  }
  return ms;
}

ErrorClass classify_error(double residual, double sigma) {
  if (sigma <= 0.0) throw std::runtime_error("classify_error: sigma must be positive");
  const double r = std::abs(residual);
  if (r < 5.0 * sigma) return ErrorClass::Normal;
  if (r <= 20.0 * sigma) return ErrorClass::Gross;
  return ErrorClass::Extreme;
}

PrefilterResult prefilter(const MeasurementSet& ms, const TypeLimits& limits) {
  for (const MeasurementSpec& s : ms.specs) {
    if (limits.find(s.type) == limits.end())
      throw std::runtime_error("prefilter: no limits for type " +
                               measurement_type_name(s.type));
  }
  PrefilterResult res;
  res.kept.t = ms.t;
  std::vector<double> kept_z;
  for (long m = 0; m < ms.size(); ++m) {
    const auto& [lo, hi] = limits.at(ms.specs[static_cast<std::size_t>(m)].type);
    if (ms.z(m) < lo || ms.z(m) > hi) {
      res.rejected.push_back(m);
    } else {
      res.kept.specs.push_back(ms.specs[static_cast<std::size_t>(m)]);
      kept_z.push_back(ms.z(m));
    }
  }
  res.kept.z = Eigen::Map<Eigen::VectorXd>(kept_z.data(), static_cast<long>(kept_z.size()));
  return res;
}

ObservabilityReport observability_check(const Network& net,
                                        const std::vector<MeasurementSpec>& specs) {
  if (specs.empty()) throw std::runtime_error("observability_check: no measurements");
  const long dim = 2 * net.bus_count();
  const long pinned = 2 * net.slack_index() + 1;
  const Eigen::VectorXd x = StateVector::flat(net.bus_count()).packed();

  Eigen::MatrixXd jac(static_cast<long>(specs.size()), dim - 1);
  for (std::size_t m = 0; m < specs.size(); ++m) {
    const Eigen::VectorXd row = build_quadratic_form(net, specs[m]).gradient(x);
    long c = 0;
    for (long j = 0; j < dim; ++j) {
      if (j == pinned) continue;
      jac(static_cast<long>(m), c++) = row(j);
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  const Eigen::VectorXd sv = svd.singularValues();
  long rank = 0;
  if (sv.size() > 0) {
    const double thresh = 1e-8 * sv(0);
    for (long i = 0; i < sv.size(); ++i)
      if (sv(i) > thresh) ++rank;
  }
  return {rank == dim - 1, rank};
}

std::vector<MeasurementSpec> full_plan(const Network& net, double sigma_power,
                                       double sigma_vmag) {
  std::vector<MeasurementSpec> plan;
  const auto bus_types = {MeasurementType::VmagSq, MeasurementType::PInj,
                          MeasurementType::QInj};
  for (MeasurementType t : bus_types) {
    for (const Bus& b : net.buses())
      plan.push_back({t, b.id, t == MeasurementType::VmagSq ? sigma_vmag : sigma_power});
  }
  const auto line_types = {MeasurementType::PFlowFwd, MeasurementType::QFlowFwd,
                           MeasurementType::PFlowTerm, MeasurementType::QFlowTerm};
  for (MeasurementType t : line_types) {
    for (long li = 0; li < net.line_count(); ++li)
      plan.push_back({t, static_cast<int>(li + 1), sigma_power});
  }
  return plan;
}

std::vector<MeasurementSpec> thin_plan(const std::vector<MeasurementSpec>& plan,
                                       long target) {
  if (target >= static_cast<long>(plan.size())) return plan;
  if (target < 1) throw std::runtime_error("thin_plan: target must be positive");

  // one queue per type family; quotas assigned round-robin in enum order,
  // then each family is sampled at an even stride so selections spread
  // over the whole network instead of clustering on low indices
  std::vector<std::vector<std::size_t>> families(7);
  for (std::size_t i = 0; i < plan.size(); ++i)
    families[static_cast<std::size_t>(plan[i].type)].push_back(i);

  std::vector<long> quota(7, 0);
  long assigned = 0;
  while (assigned < target) {
    bool any = false;
    for (std::size_t f = 0; f < 7 && assigned < target; ++f) {
      if (quota[f] < static_cast<long>(families[f].size())) {
        ++quota[f];
        ++assigned;
        any = true;
      }
    }
    if (!any) break;
  }

  std::vector<std::size_t> picked;
  for (std::size_t f = 0; f < 7; ++f) {
    const long n = static_cast<long>(families[f].size());
    for (long i = 0; i < quota[f]; ++i)
      picked.push_back(families[f][static_cast<std::size_t>(i * n / quota[f])]);
  }
  std::sort(picked.begin(), picked.end());
  picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
  std::vector<MeasurementSpec> out;
  out.reserve(picked.size());
  for (std::size_t i : picked) out.push_back(plan[i]);
  return out;
}

std::vector<MeasurementSpec> load_plan(const std::string& path) {
  csv::Table t = csv::read_table(path);
  const std::size_t c_type = t.column("mtype");
  const std::size_t c_loc = t.column("location");
  const std::size_t c_sigma = t.column("sigma");
  std::vector<MeasurementSpec> specs;
  specs.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    MeasurementSpec s;
    s.type = measurement_type_from_name(t.rows[r][c_type]);
    s.location = static_cast<int>(t.integer(r, c_loc));
    s.sigma = t.num(r, c_sigma);
    if (s.sigma <= 0.0) throw std::runtime_error("plan: sigma must be positive");
    specs.push_back(s);
  }
  return specs;
}

void save_plan(const std::string& path, const std::vector<MeasurementSpec>& specs) {
  csv::Writer w(path);
  w.header({"mtype", "location", "sigma"});
  for (const MeasurementSpec& s : specs) {
    w.cell(measurement_type_name(s.type));
    w.cell(static_cast<long>(s.location));
    w.cell(s.sigma);
    w.end_row();
  }
}

MeasurementSet load_measurement_set(const std::string& path) {
  csv::Table t = csv::read_table(path);
  const std::size_t c_t = t.column("t");
  const std::size_t c_type = t.column("mtype");
  const std::size_t c_loc = t.column("location");
  const std::size_t c_z = t.column("z");
  const std::size_t c_sigma = t.column("sigma");
  MeasurementSet ms;
  ms.z.resize(static_cast<long>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (r == 0) ms.t = t.integer(r, c_t);
    MeasurementSpec s;
    s.type = measurement_type_from_name(t.rows[r][c_type]);
    s.location = static_cast<int>(t.integer(r, c_loc));
    s.sigma = t.num(r, c_sigma);
    ms.specs.push_back(s);
    ms.z(static_cast<long>(r)) = t.num(r, c_z);
  }
  return ms;
}

void save_measurement_set(const std::string& path, const MeasurementSet& ms) {
  csv::Writer w(path);
  w.header({"t", "index", "mtype", "location", "z", "sigma"});
  for (long m = 0; m < ms.size(); ++m) {
    const MeasurementSpec& s = ms.specs[static_cast<std::size_t>(m)];
    w.cell(ms.t);
    w.cell(m);
    w.cell(measurement_type_name(s.type));
    w.cell(static_cast<long>(s.location));
    w.cell(ms.z(m));
    w.cell(s.sigma);
    w.end_row();
  }
}

}  // namespace gridse
