#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace articfit {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over several independently sized parameter blocks sharing one step count.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Registers a parameter block; returns its slot id.
  std::size_t add_slot(std::size_t size);

  void begin_step() { ++step_; }
  long step() const { return step_; }

  void update(std::size_t slot, std::span<double> params, std::span<const double> grads);

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  AdamConfig config_;
  long step_ = 0;
  std::vector<Moments> slots_;
};

}  // namespace articfit
