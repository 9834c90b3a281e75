#pragma once

#include <cmath>
#include <functional>

#include <doctest.h>

#include "torusdiff/errors.hpp"

#define CHECK_NEAR(a, b, tol) CHECK(std::abs(static_cast<double>(a) - static_cast<double>(b)) <= (tol))
#define REQUIRE_NEAR(a, b, tol) REQUIRE(std::abs(static_cast<double>(a) - static_cast<double>(b)) <= (tol))

namespace testing_support {

/// Kind of the library error raised by `fn`; fails the check if none is raised.
inline torusdiff::ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const torusdiff::Error& e) {
    return e.kind();
  }
  FAIL_CHECK("no error raised");
  return torusdiff::ErrorKind::InvalidArgument;
}

}  // namespace testing_support
