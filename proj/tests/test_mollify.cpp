#include "doctest.h"

#include "sdem/fields.hpp"
#include "sdem/mollify.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <random>

using namespace sdem;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

double bump(double r2) { return r2 >= 1.0 ? 0.0 : std::exp(1.0 / (r2 - 1.0)); }

// Unnormalized masses of exp(1/(|x|^2-1)) on the unit ball, by direct integration.
double bump_mass_1d() {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate([](double x) { return bump(x * x); }, -1.0, 1.0);
}

double bump_mass_2d() {
  boost::math::quadrature::tanh_sinh<double> outer, inner;
  return outer.integrate(
      [&](double x) {
        const double h = std::sqrt(std::max(0.0, 1.0 - x * x));
        if (h == 0.0) return 0.0;
        return inner.integrate([x](double y) { return bump(x * x + y * y); }, -h, h);
      },
      -1.0, 1.0);
}

double root_abs(const Point& x) { return std::sqrt(std::abs(x[0])); }

std::vector<Point> line(double lo, double hi, int count) {
  std::vector<Point> out;
  for (int i = 0; i < count; ++i) out.push_back(pt({lo + (hi - lo) * i / (count - 1.0)}));
  return out;
}

VectorFieldSet smooth_1d() {
  return VectorFieldSet(
      1, 1,
      [](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> a) {
        a(0, 0) = std::sin(2 * x[0]);
        a(0, 1) = 2.0 + std::cos(x[0]) * x[0];
      },
      [](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> da) {
        da(0, 0) = 2 * std::cos(2 * x[0]);
        da(0, 1) = std::cos(x[0]) - x[0] * std::sin(x[0]);
      },
      {}, "smooth_1d");
}

VectorFieldSet smooth_2d() {
  return VectorFieldSet(
      2, 2,
      [](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> a) {
        a.col(0) = pt({std::sin(x[0] * x[1]), -x[1] * x[1]});
        a.col(1) = pt({1.5 + std::cos(x[1]), 0.2 * x[0]});
        a.col(2) = pt({std::exp(-x[0] * x[0]), 2.0});
      },
      [](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> da) {
        da.setZero();
        da(0, 0) = x[1] * std::cos(x[0] * x[1]);
        da(0, 1) = x[0] * std::cos(x[0] * x[1]);
        da(1, 1) = -2 * x[1];
        da(0, 3) = -std::sin(x[1]);
        da(1, 2) = 0.2;
        da(0, 4) = -2 * x[0] * std::exp(-x[0] * x[0]);
      },
      {}, "smooth_2d");
}

}  // namespace

TEST_CASE("mollifier normalizing constant") {
  const double m1 = bump_mass_1d();
  CHECK(m1 == doctest::Approx(0.443993816168079).epsilon(1e-12));
  CHECK(mollifier_constant(1) == doctest::Approx(1.0 / m1).epsilon(1e-12));
  CHECK(mollifier_constant(1) == doctest::Approx(2.2522836210435817).epsilon(1e-12));
  CHECK(eta(pt({0.0})) == doctest::Approx(mollifier_constant(1) * std::exp(-1.0)).epsilon(1e-15));

  CHECK(mollifier_constant(2) == doctest::Approx(1.0 / bump_mass_2d()).epsilon(1e-9));
  CHECK(mollifier_constant(2) == doctest::Approx(2.143565775792248).epsilon(1e-9));
  CHECK_THROWS_AS(mollifier_constant(0), Error);
}

TEST_CASE("eta support, symmetry and gradient") {
  CHECK(eta(pt({1.0})) == 0.0);
  CHECK(eta(pt({-1.5})) == 0.0);
  CHECK(eta(pt({0.6, 0.8})) == 0.0);
  CHECK(eta_gradient(pt({2.0})).isZero());

  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int i = 0; i < 1000; ++i) {
    const Point x = pt({u(gen), u(gen)});
    CHECK(eta(x) == eta(Point(-x)));
    const Point y = pt({u(gen)});
    CHECK(eta(y) == eta(Point(-y)));
  }
  // gradient against central differences
  for (double x : {-0.7, -0.2, 0.1, 0.5, 0.9}) {
    const double h = 1e-6;
    const double fd = (eta(pt({x + h})) - eta(pt({x - h}))) / (2 * h);
    CHECK(eta_gradient(pt({x}))[0] == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(eta_eps(pt({0.05}), 0.1) == doctest::Approx(10.0 * eta(pt({0.5}))));
  CHECK(eta_eps(pt({0.05, 0.0}), 0.1) == doctest::Approx(100.0 * eta(pt({0.5, 0.0}))));
}

TEST_CASE("mollified constants and linear maps are reproduced") {
  const auto bm = builtin_field("bm", {2});
  const auto bme = mollify_field(bm, 0.1).as_field();
  const auto ou = builtin_field("ou", {1.3});
  const auto oue = mollify_field(ou, 0.2).as_field();
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 100; ++i) {
    const Point x2 = pt({u(gen), u(gen)});
    CHECK((bme.coefficients(x2) - bm.coefficients(x2)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(bme.derivatives(x2).isZero());
    const Point x1 = pt({u(gen)});
    CHECK((oue.coefficients(x1) - ou.coefficients(x1)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((oue.derivatives(x1) - ou.derivatives(x1)).cwiseAbs().maxCoeff() < 1e-13);
  }

  const ScalarFn ident = [](const Point& x) { return x[0]; };
  const ScalarFn constant = [](const Point&) { return 3.25; };
  const auto grid = line(-1, 1, 101);
  CHECK(sup_error(constant, mollify_scalar(constant, 1, 0.1), grid) < 1e-14);
  CHECK(sup_error(ident, mollify_scalar(ident, 1, 0.1), grid) < 1e-14);
  CHECK(sup_error(ident, mollify_scalar(ident, 1, 0.1, QuadratureSpec::midpoint_check()), grid) < 1e-14);
  CHECK_THROWS_AS(sup_error(ident, ident, {}), Error);
}

TEST_CASE("mollified |x| at the origin is c0 eps") {
  boost::math::quadrature::tanh_sinh<double> ts;
  const double C = 1.0 / bump_mass_1d();
  const double c0 = 2.0 * C * ts.integrate([](double z) { return z * bump(z * z); }, 0.0, 1.0);
  CHECK(c0 == doctest::Approx(0.33445399770997375).epsilon(1e-12));
  const ScalarFn absf = [](const Point& x) { return std::abs(x[0]); };
  for (double eps : {0.2, 0.1, 0.01}) {
    CHECK(mollify_scalar(absf, 1, eps)(pt({0.0})) == doctest::Approx(c0 * eps).epsilon(1e-9));
  }
}

TEST_CASE("mollified sqrt|x| keeps its Hoelder constant and sup bound") {
  // |sqrt|x| - sqrt|y|| <= |x - y|^{1/2}, so K = 1 at alpha = 1/2
  for (double eps : {0.1, 0.01}) {
    const ScalarFn fe = mollify_scalar(root_abs, 1, eps);
    const auto grid = line(-1, 1, 2001);
    CHECK(sup_error(root_abs, fe, grid) <= std::sqrt(eps) + 1e-6);
    std::vector<double> values;
    for (const auto& x : grid) values.push_back(fe(x));
    double K = 0.0;
    for (std::size_t i = 0; i < grid.size(); i += 7) {
      for (std::size_t j = i + 1; j < grid.size(); j += 3) {
        K = std::max(K, std::abs(values[i] - values[j]) / std::sqrt(std::abs(grid[i][0] - grid[j][0])));
      }
    }
    // pairs symmetric about the origin are the extremal ones
    for (int i = 1; i <= 400; ++i) {
      const double d = 2.0 * i / 400.0 * eps;
      K = std::max(K, std::abs(fe(pt({d / 2})) - fe(pt({-d / 2}))) / std::sqrt(d));
      K = std::max(K, std::abs(fe(pt({d})) - fe(pt({0.0}))) / std::sqrt(d));
    }
    CHECK(K <= 1.0 + 1e-6);
  }
}

TEST_CASE("mollification does not increase the Hoelder constant of the log example") {
  const auto le = builtin_field("log_example", {1.0});
  std::vector<std::pair<Point, Point>> pairs;
  for (int i = 1; i <= 2000; ++i) {
    const double d = 2.0 * i / 2000.0;
    pairs.emplace_back(pt({-d / 2}), pt({d / 2}));
  }
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(gen), b = u(gen);
    if (a != b) pairs.emplace_back(pt({a}), pt({b}));
  }
  const double base = hoelder_estimate(le, 0.5, pairs);
  CHECK(base == doctest::Approx(le.meta().hoelder_K).epsilon(1e-6));
  for (double eps : {0.2, 0.1, 0.05}) {
    const auto fe = mollify_field(le, eps).as_field();
    CHECK(hoelder_estimate(fe, 0.5, pairs) <= base + 1e-6);
  }
}

TEST_CASE("mollified values stay below the local sup") {
  const auto le = builtin_field("log_example", {1.0});
  const auto root = scalar_drift_field([](double x) { return std::sqrt(std::abs(x)); });
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-2, 2);
  for (const auto* base : {&le, &root}) {
    const double eps = 0.1;
    const auto fe = mollify_field(*base, eps).as_field();
    for (int i = 0; i < 100; ++i) {
      const double x = u(gen);
      Eigen::ArrayXd local = Eigen::ArrayXd::Zero(base->m() + 1);
      for (int k = 0; k <= 400; ++k) {
        const double y = x - eps + 2 * eps * k / 400.0;
        local = local.max(base->coefficients(pt({y})).row(0).transpose().array().abs());
      }
      const Eigen::ArrayXd mollified = fe.coefficients(pt({x})).row(0).transpose().array().abs();
      CHECK((mollified <= local + 1e-12).all());
    }
  }
}

TEST_CASE("the two derivative routes agree for smooth fields") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (const auto& base : {smooth_1d(), smooth_2d()}) {
    for (double eps : {0.2, 0.05}) {
      const auto weak = mollify_field(base, eps, {}, DerivativeRoute::weak_derivative);
      const auto kern = mollify_field(base, eps, {}, DerivativeRoute::kernel_gradient);
      CHECK(weak.route() == DerivativeRoute::weak_derivative);
      CHECK(kern.route() == DerivativeRoute::kernel_gradient);
      const auto n = static_cast<Eigen::Index>(base.n());
      Matrix a(n, n * static_cast<Eigen::Index>(base.m() + 1)), b = a;
      for (int i = 0; i < 100; ++i) {
        Point x(n);
        for (Eigen::Index j = 0; j < n; ++j) x[j] = u(gen);
        weak.derivatives(x, a);
        kern.derivatives(x, b);
        CAPTURE(n);
        CAPTURE(eps);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
      }
    }
  }
  // without a supplied derivative the kernel-gradient route is chosen
  const auto no_da = scalar_drift_field([](double x) { return x * x; });
  const auto m = mollify_field(no_da, 0.1);
  CHECK(m.route() == DerivativeRoute::kernel_gradient);
  CHECK(m.as_field().derivative(0, pt({0.7}))(0, 0) == doctest::Approx(1.4).epsilon(1e-8));
  CHECK_THROWS_AS(mollify_field(no_da, 0.1, {}, DerivativeRoute::weak_derivative), Error);
}

TEST_CASE("mollified derivative matches differences of the mollified field") {
  const auto le = builtin_field("log_example", {1.0});
  const auto fe = mollify_field(le, 0.1).as_field();
  for (double x : {-1.3, -0.6, -0.05, 0.0, 0.02, 0.4, 0.95, 1.08}) {
    const double h = 1e-5;
    const double fd = (fe.component(1, pt({x + h}))[0] - fe.component(1, pt({x - h}))[0]) / (2 * h);
    CHECK(fe.derivative(1, pt({x}))(0, 0) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("mollified log example stays elliptic") {
  const auto le = builtin_field("log_example", {1.0});
  const auto grid = line(-3, 3, 3001);
  for (double eps : {0.1, 0.05, 0.01}) {
    const auto fe = mollify_field(le, eps).as_field();
    CHECK(ellipticity_margin(fe, grid) >= le.meta().theta / 2);
    CHECK(fe.name() == "log_example_mollified");
    CHECK(fe.params().back() == eps);
  }
}

TEST_CASE("local L2 error of mollified sqrt|x| shrinks with eps") {
  double previous = INFINITY;
  for (double eps : {0.2, 0.1, 0.05}) {
    const ScalarFn fe = mollify_scalar(root_abs, 1, eps);
    const int cells = 4000;
    double acc = 0.0;
    for (int i = 0; i <= cells; ++i) {
      const Point x = pt({-1.0 + 2.0 * i / cells});
      const double e = fe(x) - root_abs(x);
      acc += (i == 0 || i == cells ? 0.5 : 1.0) * e * e * (2.0 / cells);
    }
    CHECK(acc < previous);
    previous = acc;
  }
}

TEST_CASE("gauss and midpoint rules agree") {
  const auto le = builtin_field("log_example", {1.0});
  const auto gauss = mollify_field(le, 0.1).as_field();
  const auto mid = mollify_field(le, 0.1, QuadratureSpec::midpoint_check()).as_field();
  for (const auto& x : line(-1.5, 1.5, 61)) {
    CHECK(std::abs(gauss.component(1, x)[0] - mid.component(1, x)[0]) < 1e-6);
  }
  const auto g2 = mollify_field(smooth_2d(), 0.2).as_field();
  const auto m2 = mollify_field(smooth_2d(), 0.2, QuadratureSpec::midpoint_check()).as_field();
  CHECK((g2.coefficients(pt({0.3, -0.4})) - m2.coefficients(pt({0.3, -0.4}))).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("refinement check and construction errors") {
  const auto le = builtin_field("log_example", {1.0});
  const auto m = mollify_field(le, 0.1);
  CHECK_NOTHROW(m.refinement_check(line(-1.5, 1.5, 31), 1e-8));
  CHECK_THROWS_AS(mollify_field(le, 0.1, {QuadratureSpec::Rule::gauss_legendre, 8, 1}).refinement_check(
                      line(-0.2, 0.2, 21), 1e-15),
                  Error);

  CHECK_THROWS_AS(mollify_field(le, 0.0), Error);
  CHECK_THROWS_AS(mollify_field(le, -0.1), Error);
  CHECK_THROWS_AS(mollify_field(le, 0.1, {QuadratureSpec::Rule::gauss_legendre, 4, 1}), Error);
  CHECK_THROWS_AS(mollify_field(builtin_field("bm", {4}), 0.1), Error);
  // a rule too coarse to carry the mass of eta
  CHECK_THROWS_AS(mollify_field(le, 0.1, {QuadratureSpec::Rule::midpoint, 8, 1}), Error);
}

TEST_CASE("quadrature spec json") {
  const QuadratureSpec q{QuadratureSpec::Rule::midpoint, 24, 2};
  const auto back = quad_from_json(quad_to_json(q));
  CHECK(back.rule == q.rule);
  CHECK(back.nodes == 24);
  CHECK(back.panels == 2);
  CHECK_THROWS_AS(quad_from_json({{"rule", "simpson"}}), Error);
}
