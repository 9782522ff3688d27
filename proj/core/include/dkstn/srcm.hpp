#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dkstn/autograd.hpp"

namespace dkstn {

struct SrcmConfig {
  std::size_t layers = 7;  // layer 1 plain conv, layers 2.. residual
  std::size_t channels = 16;
  std::size_t first_kernel = 7;
  std::size_t residual_kernel = 3;
  std::size_t first_stride = 2;
  std::size_t projection_dim = 256;  // 0: pure flatten, features have length L*W*C
  std::size_t input_channels = 4;

  void validate() const;
};

struct SrcmGeometry {
  std::size_t height = 0, width = 0;  // L, W after layer 1
  std::size_t flat = 0;               // L*W*C
  std::size_t features = 0;           // D_in
};

SrcmGeometry srcm_geometry(const SrcmConfig& cfg, std::size_t lat, std::size_t lon);

struct SrcmWeights {
  std::vector<Parameter> kernels;  // [C, Cin, k, k] per layer
  std::vector<Parameter> biases;   // [C] per layer
  Parameter projection;            // [flat, D_in]; unused when projection_dim == 0
  Parameter projection_bias;       // [D_in]

  std::vector<Parameter*> parameters();
};

/// Uniform(+-sqrt(1/fan_in)) weights, zero biases.
SrcmWeights init_srcm(const SrcmConfig& cfg, std::size_t lat, std::size_t lon,
                      std::mt19937_64& rng);

/// x is [c, l, w] or [N, c, l, w]; result is [D_in] or [N, D_in].
Var srcm_forward(Var x, const SrcmConfig& cfg, SrcmWeights& weights);
/// x is [M, k, l, w, c] (channel last); result is [M, k, D_in].
Var srcm_forward_batch(Var x, const SrcmConfig& cfg, SrcmWeights& weights);

/// Uniform(-bound, bound) tensor filled in row-major order.
Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng);

}  // namespace dkstn
