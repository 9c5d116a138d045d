#include <doctest.h>

#include "gradient_cases.hpp"

TEST_CASE("finite-difference gradient checks") {
  for (const auto& c : mds::testing::gradient_cases()) {
    for (int v = 0; v < 3; ++v) {
      CAPTURE(c.name);
      CAPTURE(v);
      CHECK(c.run(v) < 1e-4);
    }
  }
}
