#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nai {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a flat parameter vector. Moment buffers mirror the parameter
/// layout; steps are sequential and deterministic.
class Adam {
public:
  explicit Adam(std::size_t n, AdamConfig cfg = {});

  void step(std::span<double> params, std::span<const double> grads, double lr);
  int step_count() const { return step_; }

private:
  AdamConfig cfg_;
  int step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

} // namespace nai
