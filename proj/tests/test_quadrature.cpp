#include <doctest.h>

#include <cmath>

#include "coalsim/errors.hpp"
#include "coalsim/quadrature.hpp"

using namespace coalsim;

TEST_CASE("polynomials and smooth integrands") {
  CHECK(gk_adaptive([](double x) { return x * x; }, 0.0, 1.0, 1e-12) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(gk_adaptive([](double x) { return std::exp(x); }, 0.0, 2.0, 1e-12) ==
        doctest::Approx(std::exp(2.0) - 1.0).epsilon(1e-12));
  CHECK(gk_adaptive([](double x) { return std::sin(50.0 * x); }, 0.0, 1.0, 1e-10) ==
        doctest::Approx((1.0 - std::cos(50.0)) / 50.0).epsilon(1e-8));
}

TEST_CASE("integrable endpoint behavior") {
  // sqrt singularity in the derivative at 0
  CHECK(gk_adaptive([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-10) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("panel helpers") {
  auto pts = geometric_panels(1e-6, 1.0, 10.0);
  REQUIRE(pts.size() >= 2);
  CHECK(pts.front() == 1e-6);
  CHECK(pts.back() == 1.0);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    CHECK(pts[i] < pts[i + 1]);
    CHECK(pts[i + 1] / pts[i] <= 10.0 + 1e-9);
  }
  const double split = gk_panels([](double x) { return 1.0 / x; }, pts, 1e-10);
  CHECK(split == doctest::Approx(std::log(1e6)).epsilon(1e-9));
}

TEST_CASE("non-integrable singularity is reported") {
  CHECK_THROWS_AS(gk_adaptive([](double x) { return 1.0 / x; }, 0.0, 1.0, 1e-10, 40),
                  QuadratureFailure);
}
