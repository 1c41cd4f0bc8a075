#include "doctest.h"

#include "sdem/common.hpp"
#include "sdem/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

using namespace sdem;

TEST_CASE("gauss-legendre nodes and weights") {
  const auto two = quad::gauss_legendre(2);
  CHECK(two.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)));
  CHECK(two.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(two.weights[0] == doctest::Approx(1.0));

  const auto three = quad::gauss_legendre(3);
  CHECK(three.nodes[1] == doctest::Approx(0.0));
  CHECK(three.weights[1] == doctest::Approx(8.0 / 9.0));
  CHECK(three.weights[0] == doctest::Approx(5.0 / 9.0));
}

TEST_CASE("n-point gauss-legendre is exact up to degree 2n-1") {
  for (std::size_t n : {1, 2, 5, 8, 16, 32}) {
    const auto r = quad::gauss_legendre(n);
    for (std::size_t d = 0; d <= 2 * n - 1; ++d) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], static_cast<double>(d));
      const double exact = d % 2 ? 0.0 : 2.0 / static_cast<double>(d + 1);
      CHECK(s == doctest::Approx(exact).epsilon(1e-12));
    }
  }
}

TEST_CASE("composite and midpoint rules") {
  const auto c = quad::composite_gauss_legendre(0.0, std::numbers::pi, 8, 4);
  double s = 0.0;
  for (std::size_t i = 0; i < c.nodes.size(); ++i) s += c.weights[i] * std::sin(c.nodes[i]);
  CHECK(s == doctest::Approx(2.0).epsilon(1e-13));

  const auto m = quad::midpoint(-1.0, 1.0, 4);
  CHECK(m.nodes.size() == 4);
  CHECK(m.nodes[0] == doctest::Approx(-0.75));
  CHECK(m.weights[0] == doctest::Approx(0.5));
}

TEST_CASE("adaptive quadrature handles endpoint singularities") {
  // int_0^1 sqrt(|log y|) dy = Gamma(3/2)
  const double v = quad::adaptive([](double y) { return y <= 0.0 ? 0.0 : std::sqrt(std::abs(std::log(y))); }, 0.0, 1.0);
  CHECK(std::abs(v - std::sqrt(std::numbers::pi) / 2.0) < 1e-10);

  // int_0^x sqrt(|log y|) dy = Gamma(3/2, -log x)
  for (double x : {1e-6, 1e-3, 0.1, 0.5, 0.9, 0.999}) {
    const double w = quad::adaptive([](double y) { return y <= 0.0 ? 0.0 : std::sqrt(std::abs(std::log(y))); }, 0.0, x);
    CHECK(std::abs(w - boost::math::tgamma(1.5, -std::log(x))) < 1e-10);
  }
  CHECK(quad::adaptive([](double) { return 1.0; }, 2.0, 2.0) == 0.0);
}

TEST_CASE("summaries and fingerprints") {
  const double xs[] = {1.0, 2.0, 3.0, std::nan(""), 4.0};
  const auto r = summarize(xs, 17);
  CHECK(r.estimate == doctest::Approx(2.5));
  CHECK(r.paths == 4);
  CHECK(r.excluded == 1);
  CHECK(r.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(r.config_hash == 17);
  CHECK(r.excluded_fraction() == doctest::Approx(0.2));

  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}
