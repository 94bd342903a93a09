#pragma once

#include <functional>
#include <span>
#include <string>

#include "odml/layers.hpp"
#include "odml/rng.hpp"

namespace odml {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "param[r,c]: analytic=..., numeric=..." for the worst probe
};

// Central-difference check of analytic gradients.
//
// `loss` must recompute the full forward pass from current parameter values
// and return a scalar; `compute_grads` must fill every ParamRef's grad buffer
// (after zeroing). Probes `probe_count` randomly chosen parameter entries
// (all entries if the total is smaller) with step h and compares
// |analytic - numeric| / max(1, |analytic|, |numeric|).
//
// Throws ValidationError if two back-to-back evaluations of `loss` disagree,
// since a non-deterministic loss makes the comparison meaningless.
GradCheckResult grad_check(std::span<const ParamRef> params,
                           const std::function<double()>& loss,
                           const std::function<void()>& compute_grads,
                           std::size_t probe_count, Rng& rng, double step = 1e-5);

}  // namespace odml
