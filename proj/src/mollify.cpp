#include "sdem/mollify.hpp"

#include "sdem/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace sdem {

using nlohmann::json;

json quad_to_json(const QuadratureSpec& q) {
  return {{"rule", q.rule == QuadratureSpec::Rule::gauss_legendre ? "gauss_legendre" : "midpoint"},
          {"nodes", q.nodes},
          {"panels", q.panels}};
}

QuadratureSpec quad_from_json(const json& doc) {
  QuadratureSpec q;
  const auto rule = doc.value("rule", std::string("gauss_legendre"));
  if (rule == "gauss_legendre") {
    q.rule = QuadratureSpec::Rule::gauss_legendre;
  } else if (rule == "midpoint") {
    q.rule = QuadratureSpec::Rule::midpoint;
  } else {
    throw Error("quadrature spec: unknown rule '" + rule + "'");
  }
  q.nodes = doc.value("nodes", q.nodes);
  q.panels = doc.value("panels", q.panels);
  return q;
}

double mollifier_constant(std::size_t n) {
  if (n == 0) throw Error("mollifier_constant: dimension must be positive");
  static std::mutex mu;
  static std::map<std::size_t, double> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  // Radial integral; |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2).
  const double dn = static_cast<double>(n);
  const double radial = quad::adaptive(
      [dn](double r) { return r >= 1.0 ? 0.0 : std::pow(r, dn - 1.0) * std::exp(1.0 / (r * r - 1.0)); },
      0.0, 1.0, 1e-14);
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * dn) / boost::math::tgamma(0.5 * dn);
  const double c = 1.0 / (sphere * radial);
  cache.emplace(n, c);
  return c;
}

double eta(const Point& x) {
  const double r2 = x.squaredNorm();
  if (r2 >= 1.0) return 0.0;
  return mollifier_constant(static_cast<std::size_t>(x.size())) * std::exp(1.0 / (r2 - 1.0));
}

Point eta_gradient(const Point& x) {
  const double r2 = x.squaredNorm();
  if (r2 >= 1.0) return Point::Zero(x.size());
  const double d = r2 - 1.0;
  return eta(x) * (-2.0 / (d * d)) * x;
}

double eta_eps(const Point& x, double eps) {
  return std::pow(eps, -static_cast<double>(x.size())) * eta(x / eps);
}

namespace {

struct NodeTable {
  Matrix offsets;       // n x K quadrature nodes z_k inside B_eps
  Eigen::VectorXd w;    // w_k eta_eps(z_k) / mass
  Matrix grad;          // n x K: w_k grad eta_eps(z_k) / mass
  double raw_mass = 0;  // sum_k w_k eta_eps(z_k) before normalization
};

NodeTable build_nodes(std::size_t n, double eps, const QuadratureSpec& q) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw Error("mollify: eps must be positive");
  if (n > 3) throw Error("mollify: dimension above 3 is not supported");
  if (q.nodes < 8) throw Error("mollify: quadrature resolution must be at least 8 nodes per axis");

  quad::Rule1d rule;
  if (q.rule == QuadratureSpec::Rule::gauss_legendre) {
    const std::size_t panels = q.panels != 0 ? q.panels : (n == 1 ? 4 : n == 2 ? 2 : 1);
    rule = quad::composite_gauss_legendre(-eps, eps, q.nodes, panels);
  } else {
    rule = quad::midpoint(-eps, eps, q.nodes);
  }
  const std::size_t per_axis = rule.nodes.size();
  std::size_t total = 1;
  for (std::size_t d = 0; d < n; ++d) total *= per_axis;

  const auto ni = static_cast<Eigen::Index>(n);
  std::vector<Point> zs;
  std::vector<double> ws;
  std::vector<Point> gs;
  const double inv_eps = 1.0 / eps;
  const double scale = std::pow(eps, -static_cast<double>(n));
  std::vector<std::size_t> idx(n, 0);
  Point z(ni);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double weight = 1.0;
    for (std::size_t d = 0; d < n; ++d) {
      idx[d] = rem % per_axis;
      rem /= per_axis;
      z[static_cast<Eigen::Index>(d)] = rule.nodes[idx[d]];
      weight *= rule.weights[idx[d]];
    }
    const Point u = z * inv_eps;
    const double e = eta(u);
    if (e == 0.0) continue;
    zs.push_back(z);
    ws.push_back(weight * scale * e);
    gs.push_back(weight * scale * inv_eps * eta_gradient(u));
  }

  NodeTable t;
  const auto K = static_cast<Eigen::Index>(zs.size());
  t.offsets.resize(ni, K);
  t.w.resize(K);
  t.grad.resize(ni, K);
  double mass = 0.0;
  for (double v : ws) mass += v;
  t.raw_mass = mass;
  for (Eigen::Index k = 0; k < K; ++k) {
    t.offsets.col(k) = zs[static_cast<std::size_t>(k)];
    t.w[k] = ws[static_cast<std::size_t>(k)] / mass;
    t.grad.col(k) = gs[static_cast<std::size_t>(k)] / mass;
  }
  return t;
}

}  // namespace

struct MollifiedFieldSet::Impl {
  VectorFieldSet base;
  double eps;
  QuadratureSpec quad;
  DerivativeRoute route;
  NodeTable nodes;
  NodeTable kernel;  // finer rule for the kernel-gradient route

  // out = sum_k w_k eval(x - z_k), accumulated column-major in node order
  template <class Eval>
  static void convolve(const NodeTable& t, const Eval& eval, const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) {
    const Eigen::Index n = x.size();
    Matrix buf(out.rows(), out.cols());
    Point y(n);
    out.setZero();
    const double* z = t.offsets.data();
    const double* w = t.w.data();
    for (Eigen::Index k = 0; k < t.w.size(); ++k, z += n) {
      for (Eigen::Index d = 0; d < n; ++d) y[d] = x[d] - z[d];
      eval(y, buf);
      const double wk = w[k];
      const double* b = buf.data();
      for (Eigen::Index c = 0; c < out.cols(); ++c) {
        for (Eigen::Index r = 0; r < out.rows(); ++r) out(r, c) += wk * b[c * out.rows() + r];
      }
    }
  }

  void coefficients(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const {
    convolve(nodes, base.coeff_fn(), x, out);
  }

  void derivatives(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const {
    const auto n = static_cast<Eigen::Index>(base.n());
    const auto cols = static_cast<Eigen::Index>(base.m() + 1);
    if (route == DerivativeRoute::weak_derivative) {
      convolve(nodes, base.jacobian_fn(), x, out);
      return;
    }
    Point y(n);
    out.setZero();
    Matrix a(n, cols);
    for (Eigen::Index k = 0; k < kernel.w.size(); ++k) {
      y = x - kernel.offsets.col(k);
      base.coefficients(y, a);
      for (Eigen::Index l = 0; l < cols; ++l) {
        // column j of DA_l gets d_j eta_eps(z_k) * A_l(x - z_k)
        out.middleCols(l * n, n).noalias() += a.col(l) * kernel.grad.col(k).transpose();
      }
    }
  }
};

MollifiedFieldSet::MollifiedFieldSet(VectorFieldSet base, double eps, QuadratureSpec quad,
                                     DerivativeRoute route) {
  if (route == DerivativeRoute::automatic) {
    route = base.has_derivative() ? DerivativeRoute::weak_derivative : DerivativeRoute::kernel_gradient;
  }
  if (route == DerivativeRoute::weak_derivative && !base.has_derivative()) {
    throw Error("weak derivative unavailable for field '" + base.name() + "'");
  }
  NodeTable nodes = build_nodes(base.n(), eps, quad);
  // unnormalized mass far from 1: the rule does not resolve eta_eps
  if (std::abs(nodes.raw_mass - 1.0) > 1e-3) {
    throw Error("mollify: quadrature did not converge (unnormalized mass " +
                std::to_string(nodes.raw_mass) + ")");
  }
  NodeTable kernel;
  if (route == DerivativeRoute::kernel_gradient) {
    QuadratureSpec finer = quad;
    if (finer.rule == QuadratureSpec::Rule::gauss_legendre) {
      const std::size_t n = base.n();
      finer.panels = 2 * (quad.panels != 0 ? quad.panels : (n == 1 ? 4 : n == 2 ? 2 : 1));
      finer.nodes = 2 * quad.nodes;
    } else {
      finer.nodes = 4 * quad.nodes;
    }
    kernel = build_nodes(base.n(), eps, finer);
  }
  impl_ = std::make_shared<const Impl>(
      Impl{std::move(base), eps, quad, route, std::move(nodes), std::move(kernel)});
}

const VectorFieldSet& MollifiedFieldSet::base() const { return impl_->base; }
double MollifiedFieldSet::eps() const { return impl_->eps; }
const QuadratureSpec& MollifiedFieldSet::quad() const { return impl_->quad; }
DerivativeRoute MollifiedFieldSet::route() const { return impl_->route; }
std::size_t MollifiedFieldSet::node_count() const { return static_cast<std::size_t>(impl_->nodes.w.size()); }

void MollifiedFieldSet::coefficients(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const {
  impl_->coefficients(x, out);
}

void MollifiedFieldSet::derivatives(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const {
  impl_->derivatives(x, out);
}

VectorFieldSet MollifiedFieldSet::as_field() const {
  auto impl = impl_;
  auto coeffs = [impl](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> a) { impl->coefficients(x, a); };
  auto jac = [impl](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> da) { impl->derivatives(x, da); };
  auto params = impl->base.params();
  params.push_back(impl->eps);
  // Ellipticity, Hoelder and sup bounds carry over to the mollified family.
  return VectorFieldSet(impl->base.n(), impl->base.m(), coeffs, jac, impl->base.meta(),
                        impl->base.name() + "_mollified", std::move(params));
}

void MollifiedFieldSet::refinement_check(const std::vector<Point>& points, double tol) const {
  QuadratureSpec finer = impl_->quad;
  finer.nodes *= 2;
  const MollifiedFieldSet refined(impl_->base, impl_->eps, finer, impl_->route);
  const auto n = static_cast<Eigen::Index>(impl_->base.n());
  const auto cols = static_cast<Eigen::Index>(impl_->base.m() + 1);
  Matrix a(n, cols), b(n, cols);
  for (const auto& x : points) {
    coefficients(x, a);
    refined.coefficients(x, b);
    const double gap = (a - b).cwiseAbs().maxCoeff();
    if (gap > tol) {
      throw Error("mollify: quadrature did not converge (refinement gap " + std::to_string(gap) +
                  " > " + std::to_string(tol) + ")");
    }
  }
}

MollifiedFieldSet mollify_field(const VectorFieldSet& fs, double eps, const QuadratureSpec& quad,
                                DerivativeRoute route) {
  return MollifiedFieldSet(fs, eps, quad, route);
}

ScalarFn mollify_scalar(ScalarFn f, std::size_t n, double eps, const QuadratureSpec& quad) {
  auto nodes = std::make_shared<const NodeTable>(build_nodes(n, eps, quad));
  return [f = std::move(f), nodes](const Point& x) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < nodes->w.size(); ++k) {
      acc += nodes->w[k] * f(x - nodes->offsets.col(k));
    }
    return acc;
  };
}

double sup_error(const ScalarFn& f, const ScalarFn& f_eps, const std::vector<Point>& grid) {
  if (grid.empty()) throw Error("sup_error: empty grid");
  double worst = 0.0;
  for (const auto& x : grid) worst = std::max(worst, std::abs(f_eps(x) - f(x)));
  return worst;
}

}  // namespace sdem
