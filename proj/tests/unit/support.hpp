#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "udfsketch/grid.hpp"
#include "udfsketch/udf.hpp"
#include "../oracles.hpp"

namespace testing_support {

using namespace udfsketch;

template <class Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::parameter_error;
}

using namespace oracles;

}  // namespace testing_support
