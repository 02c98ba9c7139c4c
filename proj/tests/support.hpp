#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gcr/autodiff.hpp"

namespace gcr::testing {

struct GradCheck {
  double worst = 0;  // largest relative error seen
  std::size_t checked = 0;
};

/// Compares backward() against central differences (h = 1e-5) on every entry
/// of `params`. `loss` rebuilds the graph on a fresh tape and returns its root.
inline GradCheck check_gradients(std::vector<Parameter<double>*> params,
                                 const std::function<Var(Tape<double>&)>& loss, double h = 1e-5) {
  Tape<double> tape;
  for (auto* p : params) p->zero_grad();
  tape.backward(loss(tape));
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) analytic.emplace_back(p->grad.storage().begin(), p->grad.storage().end());

  auto eval = [&] {
    tape.reset();
    return tape.scalar_value(loss(tape));
  };
  GradCheck out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = params[k]->value.storage();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = v[i];
      v[i] = x + h;
      const double fp = eval();
      v[i] = x - h;
      const double fm = eval();
      v[i] = x;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-7);
      out.worst = std::max(out.worst, rel);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace gcr::testing
