#include "odml/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "odml/error.hpp"

namespace odml {

GradCheckResult grad_check(std::span<const ParamRef> params,
                           const std::function<double()>& loss,
                           const std::function<void()>& compute_grads,
                           std::size_t probe_count, Rng& rng, double step) {
  const double l0 = loss();
  const double l1 = loss();
  if (!(l0 == l1)) {
    throw ValidationError("grad_check: loss is not deterministic (" +
                          std::to_string(l0) + " vs " + std::to_string(l1) + ")");
  }

  compute_grads();

  struct Entry {
    std::size_t param;
    std::size_t index;
  };
  std::vector<Entry> entries;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].value->data().size(); ++i) {
      entries.push_back({p, i});
    }
  }
  if (entries.size() > probe_count) {
    rng.shuffle(entries);
    entries.resize(probe_count);
  }

  GradCheckResult result;
  for (const Entry& e : entries) {
    const ParamRef& ref = params[e.param];
    double& slot = ref.value->data()[e.index];
    const double saved = slot;
    const double analytic = ref.grad->data()[e.index];

    slot = saved + step;
    const double plus = loss();
    slot = saved - step;
    const double minus = loss();
    slot = saved;

    const double numeric = (plus - minus) / (2.0 * step);
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    const double rel = std::fabs(analytic - numeric) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      const std::size_t r = e.index / ref.value->cols();
      const std::size_t c = e.index % ref.value->cols();
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s[%zu,%zu]: analytic=%.12g numeric=%.12g",
                    ref.name.c_str(), r, c, analytic, numeric);
      result.worst = buf;
    }
  }
  return result;
}

}  // namespace odml
