#pragma once

#include <functional>

#include "ledt/autodiff.hpp"
#include "ledt/mat.hpp"

namespace ledt {

// Compare the reverse-mode gradient of a scalar loss against central finite
// differences at `point`. Returns max over entries of
// |analytic - central| / max(1, |central|). The finite-difference side only
// evaluates forward values, so it is independent of the backward rules it
// checks. eps must lie in (0, 1e-2]; non-finite loss values raise.
double grad_check(const std::function<ad::Var(const ad::Var&)>& loss,
                  const Mat& point, double eps);

}  // namespace ledt
