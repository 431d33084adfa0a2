#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "tkgt/params.hpp"
#include "tkgt/tape.hpp"

namespace tkgt {

// Builds a scalar loss on the given tape from the given parameters.
using LossFn = std::function<Tape<double>::Id(Tape<double>&, const ParamStore<double>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i]" of the worst coordinate
};

// Compares analytic gradients against central finite differences over every
// parameter coordinate. Relative error per coordinate is
// |analytic - numeric| / max(1, |analytic|).
inline GradCheckResult grad_check(const LossFn& f, ParamStore<double>& params,
                                  double step = 1e-6) {
  auto eval = [&](const char* where, int pid, std::size_t k) {
    Tape<double> tape;
    auto loss = f(tape, params);
    double v = tape.val(loss).data[0];
    if (!std::isfinite(v))
      throw std::runtime_error(std::string("grad_check: non-finite forward value in ") + where +
                               " at " + (pid >= 0 ? params.names[pid] : "base") + "[" +
                               std::to_string(k) + "]");
    return v;
  };

  GradStore<double> analytic(params.size());
  {
    Tape<double> tape;
    auto loss = f(tape, params);
    if (!std::isfinite(tape.val(loss).data[0]))
      throw std::runtime_error("grad_check: non-finite forward value at base point");
    tape.backward(loss, analytic);
  }

  GradCheckResult res;
  for (std::size_t pid = 0; pid < params.size(); ++pid) {
    auto& t = params.tensors[pid];
    for (std::size_t k = 0; k < t.numel(); ++k) {
      double keep = t.data[k];
      t.data[k] = keep + step;
      double fp = eval("forward(+)", static_cast<int>(pid), k);
      t.data[k] = keep - step;
      double fm = eval("forward(-)", static_cast<int>(pid), k);
      t.data[k] = keep;
      double numeric = (fp - fm) / (2.0 * step);
      double a = analytic.touched(static_cast<int>(pid)) ? analytic.g[pid].data[k] : 0.0;
      double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = params.names[pid] + "[" + std::to_string(k) + "]";
      }
    }
  }
  return res;
}

}  // namespace tkgt
