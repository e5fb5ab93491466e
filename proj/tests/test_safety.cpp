#include "doctest.h"

#include <cmath>
#include <limits>

#include "cuq/errors.hpp"
#include "cuq/rng.hpp"
#include "cuq/safety.hpp"

using namespace cuq;

TEST_CASE("map_to_pfh is the identity with a domain check") {
  CHECK(map_to_pfh(9e-5) == 9e-5);  // ~ one failure per 1e4 hours
  CHECK(map_to_pfh(0.0) == 0.0);
  CHECK(map_to_pfh(1e-6) == 1e-6);
  CHECK(map_to_pfh(map_to_pfh(0.25)) == 0.25);  // round-trips exactly
  CHECK_THROWS_AS(map_to_pfh(-0.1), ConfigError);
  CHECK_THROWS_AS(map_to_pfh(1.5), ConfigError);
}

TEST_CASE("check_limit: the headline fail case") {
  RiskModel model;
  model.l_bio = 1.0;
  SafetyLimit limit;
  limit.lambda_per_hour = 1e-6;

  const auto verdict = check_limit(9e-5, model, limit);
  CHECK(!verdict.pass);
  CHECK(verdict.r == doctest::Approx(9e-5));
  CHECK(verdict.pfh == verdict.r);
  // roughly two orders of magnitude over the limit
  CHECK(verdict.margin_orders > -2.05);
  CHECK(verdict.margin_orders < -1.90);
}

TEST_CASE("check_limit: boundary and degenerate cases") {
  RiskModel model;
  model.l_bio = 2.0;
  SafetyLimit limit;
  limit.lambda_per_hour = 1e-6;

  // equality passes (the comparison is <=)
  CHECK(check_limit(5e-7, model, limit).pass);
  CHECK(check_limit(5e-7 + 1e-12, model, limit).pass == false);

  const auto zero = check_limit(0.0, model, limit);
  CHECK(zero.pass);
  CHECK(std::isinf(zero.margin_orders));
}

TEST_CASE("check_limit is monotone in the uncertainty") {
  RiskModel model;
  model.l_bio = 1.0;
  SafetyLimit limit;
  limit.lambda_per_hour = 1e-6;

  rng::Engine eng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double u1 = eng.uniform01() * 1e-5;
    const double u2 = u1 + eng.uniform01() * 1e-5;
    const bool pass1 = check_limit(u1, model, limit).pass;
    const bool pass2 = check_limit(u2, model, limit).pass;
    if (!pass1) CHECK(!pass2);
  }
}

TEST_CASE("margin is invariant under common rescaling") {
  RiskModel model;
  model.l_bio = 1.0;
  SafetyLimit limit;
  limit.lambda_per_hour = 1e-6;
  const auto base = check_limit(9e-5, model, limit);

  SafetyLimit scaled_limit;
  scaled_limit.lambda_per_hour = 1e-6 * 37.0;
  const auto scaled = check_limit(9e-5 * 37.0, model, scaled_limit);
  CHECK(scaled.margin_orders == doctest::Approx(base.margin_orders).epsilon(1e-12));
}

TEST_CASE("risk model refuses to default l_bio") {
  RiskModel model;  // l_bio left unset (NaN)
  CHECK_THROWS_AS(model.validate(), ConfigError);
  SafetyLimit limit;
  CHECK_THROWS_AS(check_limit(1e-5, model, limit), ConfigError);

  model.l_bio = 1.0;
  model.severity_constant = 0.0;
  CHECK_THROWS_AS(model.validate(), ConfigError);
}

TEST_CASE("distance constraint probability") {
  CHECK(distance_constraint_probability(1.0, 0.1, 1.0) == doctest::Approx(0.5));
  CHECK(distance_constraint_probability(2.0, 0.0, 1.0) == 0.0);
  CHECK(distance_constraint_probability(0.5, 0.0, 1.0) == 1.0);
  // two sigma above the threshold: standard normal tail
  CHECK(distance_constraint_probability(1.2, 0.1, 1.0) ==
        doctest::Approx(0.022750131948).epsilon(1e-6));
  CHECK_THROWS_AS(distance_constraint_probability(1.0, -0.1, 1.0), ConfigError);
}

TEST_CASE("distance constraint probability is monotone") {
  // decreasing in the measured distance
  double prev = 1.0;
  for (double d = 1.0; d <= 2.0; d += 0.1) {
    const double p = distance_constraint_probability(d, 0.2, 1.0);
    CHECK(p <= prev + 1e-15);
    prev = p;
  }
  // increasing in the uncertainty (measured distance above the threshold)
  prev = 0.0;
  for (double u = 0.05; u <= 1.0; u += 0.05) {
    const double p = distance_constraint_probability(1.5, u, 1.0);
    CHECK(p >= prev - 1e-15);
    prev = p;
  }
}
