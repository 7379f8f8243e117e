#include "anisoflow/verification.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>

#include "anisoflow/error.hpp"
#include "anisoflow/lagrangian.hpp"

namespace anisoflow {

namespace {

constexpr double kFormulaTolerance = 1e-5;
constexpr double kGradientTolerance = 1e-6;
constexpr double kHessianTolerance = 1e-4;
constexpr double kStep = 1e-6;

using Scalar = std::function<double(const Eigen::VectorXd&)>;
using Vector = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using Matrix = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

Eigen::VectorXd fd_gradient(const Scalar& f, const Eigen::VectorXd& at) {
  Eigen::VectorXd out(at.size());
  for (int i = 0; i < at.size(); ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(at.size());
    e(i) = kStep;
    out(i) = (f(at + e) - f(at - e)) / (2.0 * kStep);
  }
  return out;
}

// Column j is the derivative of g along coordinate j.
Eigen::MatrixXd fd_jacobian(const Vector& g, const Eigen::VectorXd& at) {
  Eigen::MatrixXd out(g(at).size(), at.size());
  for (int j = 0; j < at.size(); ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(at.size());
    e(j) = kStep;
    out.col(j) = (g(at + e) - g(at - e)) / (2.0 * kStep);
  }
  return out;
}

Eigen::MatrixXd fd_directional(const Matrix& h, const Eigen::VectorXd& at, const Eigen::VectorXd& dir) {
  return (h(at + kStep * dir) - h(at - kStep * dir)) / (2.0 * kStep);
}

double deviation(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

class Collector {
 public:
  explicit Collector(const std::optional<double>& override_tol) : override_(override_tol) {}

  void record(const std::string& name, double tolerance, double value) {
    auto [it, inserted] = index_.try_emplace(name, results_.size());
    if (inserted) results_.push_back({name, 0.0, override_.value_or(tolerance), false});
    PropertyResult& r = results_[it->second];
    // NaN must never pass.
    r.max_deviation = std::isnan(value) || std::isnan(r.max_deviation) ? NAN : std::max(r.max_deviation, value);
  }

  std::vector<PropertyResult> finish() {
    for (PropertyResult& r : results_) r.passed = r.max_deviation <= r.tolerance;
    return std::move(results_);
  }

 private:
  std::optional<double> override_;
  std::map<std::string, std::size_t> index_;
  std::vector<PropertyResult> results_;
};

struct Instance {
  AnisotropyModel model;
  SimplicialSurface surface;
  NodalField z;
  NodalField dir;
};

SimplicialSurface random_polygon(const AnisotropyModel& model, int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SimplicialSurface s = SimplicialSurface::closed_polygon(wulff_sample(model, 1.0, m));
  NodalField x = s.coordinates();
  const double h = mesh_size(s);
  for (int i = 0; i < x.size(); ++i) x(i) += 0.1 * h * u(rng);
  return s.with_coordinates(x);
}

// Octahedron with outward-oriented faces, randomly perturbed.
SimplicialSurface random_octahedron(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NodalField x = NodalField::Zero(18);
  for (int axis = 0; axis < 3; ++axis) {
    x(3 * (2 * axis) + axis) = 1.0;
    x(3 * (2 * axis + 1) + axis) = -1.0;
  }
  for (int i = 0; i < x.size(); ++i) x(i) += 0.1 * u(rng);
  std::vector<Element> faces;
  for (int sx = 0; sx < 2; ++sx)
    for (int sy = 0; sy < 2; ++sy)
      for (int sz = 0; sz < 2; ++sz) {
        const int a = sx, b = 2 + sy, c = 4 + sz;
        // Vertex 2k is the positive pole of axis k; odd parity flips orientation.
        if ((sx + sy + sz) % 2 == 0)
          faces.push_back({a, b, c});
        else
          faces.push_back({a, c, b});
      }
  return SimplicialSurface::triangle_mesh(std::move(x), std::move(faces));
}

NodalField random_field(int size, double amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NodalField f(size);
  for (int i = 0; i < size; ++i) f(i) = amplitude * u(rng);
  return f;
}

void check_m(Collector& out, const std::string& tag, const Instance& in) {
  const AnisotropyModel& model = in.model;
  const SimplicialSurface& s = in.surface;
  const NodalField& x0 = s.coordinates();
  auto at = [&](const NodalField& z, const NodalField& x, std::span<const MixedOrder> what) {
    return m_gamma_derivatives(model, z, s.with_coordinates(x), what);
  };
  const MGammaDerivatives d = at(in.z, x0, m_derivative::all);
  const MixedOrder dz[] = {m_derivative::dZ};
  const MixedOrder dx[] = {m_derivative::dX};
  const MixedOrder dzz[] = {m_derivative::dZZ};
  const MixedOrder dzx[] = {m_derivative::dZX};
  const MixedOrder dxx[] = {m_derivative::dXX};

  const std::string p = "M " + tag + " ";
  out.record(p + "value consistency", kFormulaTolerance,
             std::abs(d.value() - m_gamma(model, in.z, s)) / std::max(std::abs(d.value()), 1e-12));
  out.record(p + "dZ", kFormulaTolerance,
             deviation(d.dZ(), fd_gradient([&](const auto& z) { return m_gamma(model, z, s); }, in.z)));
  out.record(p + "dX", kFormulaTolerance,
             deviation(d.dX(), fd_gradient(
                                   [&](const auto& x) { return m_gamma(model, in.z, s.with_coordinates(x)); }, x0)));
  out.record(p + "dZZ", kFormulaTolerance,
             deviation(dense(d.dZZ()), fd_jacobian([&](const auto& z) { return at(z, x0, dz).dZ(); }, in.z)));
  out.record(p + "dXX", kFormulaTolerance,
             deviation(dense(d.dXX()), fd_jacobian([&](const auto& x) { return at(in.z, x, dx).dX(); }, x0)));
  out.record(p + "dZX", kFormulaTolerance,
             deviation(dense(d.dZX()), fd_jacobian([&](const auto& x) { return at(in.z, x, dz).dZ(); }, x0)));
  out.record(p + "dZZZ", kFormulaTolerance,
             deviation(dense(d.dZZZ(in.dir)),
                       fd_directional([&](const auto& z) { return dense(at(z, x0, dzz).dZZ()); }, in.z, in.dir)));
  out.record(p + "dZZX", kFormulaTolerance,
             deviation(dense(d.dZZX(in.dir)),
                       fd_directional([&](const auto& z) { return dense(at(z, x0, dzx).dZX()); }, in.z, in.dir)));
  out.record(p + "dZXX", kFormulaTolerance,
             deviation(dense(d.dZXX(in.dir)),
                       fd_directional([&](const auto& z) { return dense(at(z, x0, dxx).dXX()); }, in.z, in.dir)));
}

void check_a(Collector& out, const std::string& tag, const Instance& in) {
  const AnisotropyModel& model = in.model;
  const SimplicialSurface& s = in.surface;
  const NodalField& x0 = s.coordinates();
  const AGammaDerivatives d = a_gamma_derivatives(model, s, 3);
  auto order = [&](const NodalField& x, int k) { return a_gamma_derivatives(model, s.with_coordinates(x), k); };

  const std::string p = "A " + tag + " ";
  out.record(p + "first", kFormulaTolerance,
             deviation(d.first(), fd_gradient([&](const auto& x) { return a_gamma(model, s.with_coordinates(x)); },
                                              x0)));
  out.record(p + "second", kFormulaTolerance,
             deviation(dense(d.second()), fd_jacobian([&](const auto& x) { return order(x, 1).first(); }, x0)));
  out.record(p + "third", kFormulaTolerance,
             deviation(dense(d.third(in.dir)),
                       fd_directional([&](const auto& x) { return dense(order(x, 2).second()); }, x0, in.dir)));
}

void check_lagrangian(Collector& out, const std::string& tag, const Instance& in, std::mt19937_64& rng) {
  const SimplicialSurface& previous = in.surface;
  const int n = previous.unknown_count();
  const double h = mesh_size(previous);
  const NodalField x = previous.coordinates() + random_field(n, 0.05 * h, rng);
  const NodalField y = x + in.z;
  const NodalField p = random_field(n, 1.0, rng);
  const StepParameters params{0.3, 0.2, 0.7};

  auto split = [n](const Eigen::VectorXd& s) {
    return std::array<NodalField, 3>{s.segment(0, n), s.segment(n, n), s.segment(2 * n, n)};
  };
  Eigen::VectorXd s(3 * n);
  s << x, y, p;
  const KktSystem k = lagrangian_hessian(in.model, previous, x, y, p, params);
  const Scalar value = [&](const Eigen::VectorXd& v) {
    const auto b = split(v);
    return lagrangian_value(in.model, previous, b[0], b[1], b[2], params);
  };
  const Vector gradient = [&](const Eigen::VectorXd& v) {
    const auto b = split(v);
    return lagrangian_gradient(in.model, previous, b[0], b[1], b[2], params).stacked();
  };
  const Eigen::VectorXd g = k.gradient.stacked();
  const Eigen::MatrixXd hessian = dense(k.matrix());
  out.record("L " + tag + " gradient", kGradientTolerance, deviation(g, fd_gradient(value, s)));
  out.record("L " + tag + " gradient consistency", kGradientTolerance, deviation(g, gradient(s)));
  out.record("L " + tag + " hessian", kHessianTolerance, deviation(hessian, fd_jacobian(gradient, s)));
  out.record("L " + tag + " hessian symmetry", 0.0, (hessian - hessian.transpose()).cwiseAbs().maxCoeff());
}

}  // namespace

bool VerificationReport::passed() const {
  return std::all_of(properties.begin(), properties.end(), [](const PropertyResult& r) { return r.passed; });
}

void VerificationReport::write(std::ostream& out) const {
  std::size_t width = 0;
  for (const PropertyResult& r : properties) width = std::max(width, r.name.size());
  const auto flags = out.flags();
  for (const PropertyResult& r : properties)
    out << std::left << std::setw(static_cast<int>(width) + 2) << r.name << std::scientific << std::setprecision(3)
        << r.max_deviation << "  tol " << r.tolerance << "  " << (r.passed ? "PASS" : "FAIL") << '\n';
  out.flags(flags);
}

VerificationReport run_verification(const VerifyOptions& options) {
  if (options.instances < 1) throw Error(ErrorKind::InvalidConfig, "verification needs at least one instance");
  if (options.polygon_sizes.empty()) throw Error(ErrorKind::InvalidConfig, "verification needs a polygon size");
  for (int m : options.polygon_sizes)
    if (m < 3) throw Error(ErrorKind::InvalidConfig, "polygons need at least 3 vertices");
  if (options.tolerance && !(*options.tolerance >= 0.0))
    throw Error(ErrorKind::InvalidConfig, "tolerance must be nonnegative");

  const AnisotropyModel curves[] = {AnisotropyModel::isotropic(), AnisotropyModel::elliptic(2.0, 1.0),
                                    AnisotropyModel::reg_l1(0.1), AnisotropyModel::reg_linf(0.1)};
  const AnisotropyModel surfaces[] = {AnisotropyModel::isotropic(3), AnisotropyModel::elliptic({1.5, 1.0, 0.7}),
                                      AnisotropyModel::reg_l1(0.1, 3)};

  std::mt19937_64 rng(options.seed);
  Collector out(options.tolerance);
  for (int i = 0; i < options.instances; ++i) {
    for (int m : options.polygon_sizes) {
      const AnisotropyModel& model = curves[i % std::size(curves)];
      SimplicialSurface s = random_polygon(model, m, rng);
      const double h = mesh_size(s);
      Instance in{model, s, random_field(s.unknown_count(), 0.3 * h, rng), random_field(s.unknown_count(), 1.0, rng)};
      check_m(out, "d=1", in);
      check_a(out, "d=1", in);
      check_lagrangian(out, "d=1", in, rng);
    }
    const AnisotropyModel& model = surfaces[i % std::size(surfaces)];
    SimplicialSurface s = random_octahedron(rng);
    Instance in{model, s, random_field(s.unknown_count(), 0.3, rng), random_field(s.unknown_count(), 1.0, rng)};
    // The regularized l1 norm in 3D has no closed-form dual; it only enters the A checks.
    if (model.has_dual()) check_m(out, "d=2", in);
    check_a(out, "d=2", in);
  }
  return {out.finish()};
}

}  // namespace anisoflow
