#include "articfit/adam.hpp"

#include <cassert>
#include <cmath>

namespace articfit {

std::size_t Adam::add_slot(std::size_t size) {
  slots_.push_back({std::vector<double>(size, 0.0), std::vector<double>(size, 0.0)});
  return slots_.size() - 1;
}

void Adam::update(std::size_t slot, std::span<double> params, std::span<const double> grads) {
  auto& mo = slots_.at(slot);
  assert(params.size() == mo.m.size() && grads.size() == mo.m.size());
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double step_size = config_.lr / c1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = mo.m[i];
    double& v = mo.v[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    params[i] -= step_size * m / (std::sqrt(v) * inv_sqrt_c2 + config_.eps);
  }
}

}  // namespace articfit
