#pragma once
// Adam with bias correction and the multi-step learning-rate schedule.

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cldnet/autodiff.hpp"

namespace cldnet {

// lr by epoch (1-based): <5: 1e-2, 5-9: 1e-3, 10-19: 1e-4, 20-29: 1e-5,
// >=30: 1e-6.
struct LrSchedule {
  std::vector<int> breakpoints = {5, 10, 20, 30};
  std::vector<double> rates = {0.01, 0.001, 0.0001, 0.00001, 0.000001};

  double rate_for_epoch(int epoch) const {
    std::size_t i = 0;
    while (i < breakpoints.size() && epoch >= breakpoints[i]) ++i;
    return rates[i];
  }
};

template <typename T>
struct AdamState {
  struct Slot {
    std::vector<T> m, v;
  };
  std::map<std::string, Slot> slots;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 0.001;
};

// One bias-corrected Adam update over `params` using each node's
// accumulated grad. Throws on non-finite gradients, naming the parameter.
template <typename T>
void adam_step(const std::vector<ag::Var<T>>& params, AdamState<T>& state) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& p : params) {
    if (p->grad.size() != p->value.size()) p->ensure_grad();
    auto& slot = state.slots[p->name];
    if (slot.m.size() != p->value.size()) {
      slot.m.assign(p->value.size(), T(0));
      slot.v.assign(p->value.size(), T(0));
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = static_cast<double>(p->grad[i]);
      if (!std::isfinite(g)) {
        std::ostringstream msg;
        msg << "non-finite gradient in parameter '" << p->name << "' at index "
            << i;
        throw std::runtime_error(msg.str());
      }
      const double m = state.beta1 * slot.m[i] + (1.0 - state.beta1) * g;
      const double v = state.beta2 * slot.v[i] + (1.0 - state.beta2) * g * g;
      slot.m[i] = static_cast<T>(m);
      slot.v[i] = static_cast<T>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p->value[i] = static_cast<T>(p->value[i] -
                                   state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

}  // namespace cldnet
