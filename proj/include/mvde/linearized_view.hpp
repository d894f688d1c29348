#pragma once

#include "mvde/core.hpp"

namespace mvde {

/// Linearised data term of one view against the reference:
/// residual(s) = a(s) * w(s) + b(s), with a = <grad I, B'> and b the
/// blurred intensity difference. Pixels with mask 0 carry no data.
struct LinearizedView {
  Field a;
  Field b;
  Mask mask;
  BaselineVec baseline;
};

}  // namespace mvde
