#pragma once

#include <cstdint>
#include <vector>

#include "dkstn/autograd.hpp"

namespace dkstn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.0;  // coupled L2: added to the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter moment estimates. Moments are created lazily on the first
/// step and must shape-match their parameters afterwards.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over `params` using their accumulated
/// gradients. Throws ErrorKind::training naming the parameter on a
/// non-finite gradient; no parameter is modified in that case.
void adam_step(const std::vector<Parameter*>& params, AdamState& state);

}  // namespace dkstn
