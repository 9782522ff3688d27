#include "dkstn/srcm.hpp"

#include <cmath>

#include "dkstn/error.hpp"

namespace dkstn {

void SrcmConfig::validate() const {
  require(layers >= 2, ErrorKind::configuration, "srcm needs at least 2 layers");
  require(channels >= 1 && input_channels >= 1, ErrorKind::configuration,
          "srcm channel counts must be positive");
  require(first_kernel % 2 == 1 && residual_kernel % 2 == 1, ErrorKind::configuration,
          "srcm kernels must be odd-sized");
  require(first_stride >= 1, ErrorKind::configuration, "srcm stride must be positive");
}

SrcmGeometry srcm_geometry(const SrcmConfig& cfg, std::size_t lat, std::size_t lon) {
  cfg.validate();
  const std::size_t pad = cfg.first_kernel / 2;
  SrcmGeometry g;
  g.height = conv_output_extent(lat, cfg.first_kernel, cfg.first_stride, pad);
  g.width = conv_output_extent(lon, cfg.first_kernel, cfg.first_stride, pad);
  g.flat = g.height * g.width * cfg.channels;
  g.features = cfg.projection_dim == 0 ? g.flat : cfg.projection_dim;
  return g;
}

std::vector<Parameter*> SrcmWeights::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    out.push_back(&kernels[i]);
    out.push_back(&biases[i]);
  }
  if (!projection.value.empty()) {
    out.push_back(&projection);
    out.push_back(&projection_bias);
  }
  return out;
}

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape), 0.0);
  // Mapped by hand from 53 random bits so values do not depend on the
  // standard library's distribution implementation.
  for (auto& v : t.data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = (2.0 * u - 1.0) * bound;
  }
  return t;
}

SrcmWeights init_srcm(const SrcmConfig& cfg, std::size_t lat, std::size_t lon,
                      std::mt19937_64& rng) {
  const SrcmGeometry geo = srcm_geometry(cfg, lat, lon);
  SrcmWeights w;
  for (std::size_t layer = 1; layer <= cfg.layers; ++layer) {
    const std::size_t cin = layer == 1 ? cfg.input_channels : cfg.channels;
    const std::size_t k = layer == 1 ? cfg.first_kernel : cfg.residual_kernel;
    const double bound = std::sqrt(1.0 / static_cast<double>(cin * k * k));
    const std::string name = "srcm.layer" + std::to_string(layer);
    w.kernels.emplace_back(name + ".kernel", uniform_tensor({cfg.channels, cin, k, k}, bound, rng));
    w.biases.emplace_back(name + ".bias", Tensor({cfg.channels}, 0.0));
  }
  if (cfg.projection_dim > 0) {
    const double bound = std::sqrt(1.0 / static_cast<double>(geo.flat));
    w.projection = Parameter("srcm.projection.weight",
                             uniform_tensor({geo.flat, cfg.projection_dim}, bound, rng));
    w.projection_bias = Parameter("srcm.projection.bias", Tensor({cfg.projection_dim}, 0.0));
  }
  return w;
}

Var srcm_forward(Var x, const SrcmConfig& cfg, SrcmWeights& weights) {
  cfg.validate();
  require(weights.kernels.size() == cfg.layers && weights.biases.size() == cfg.layers,
          ErrorKind::configuration, "srcm weights do not match the configured layer count");
  const bool single = x.value().rank() == 3;
  require(single || x.value().rank() == 4, ErrorKind::dimension,
          "srcm_forward expects [c,l,w] or [N,c,l,w], got " + shape_str(x.shape()));
  require(x.shape()[single ? 0 : 1] == cfg.input_channels, ErrorKind::dimension,
          "srcm_forward: expected " + std::to_string(cfg.input_channels) + " input channels");
  Tape& tape = *x.tape;
  if (single) x = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  const std::size_t N = x.dim(0);

  Var z = conv2d(x, tape.param(weights.kernels[0]), tape.param(weights.biases[0]),
                 cfg.first_stride, cfg.first_kernel / 2);
  for (std::size_t layer = 1; layer < cfg.layers; ++layer) {
    Var r = conv2d(z, tape.param(weights.kernels[layer]), tape.param(weights.biases[layer]), 1,
                   cfg.residual_kernel / 2);
    z = relu(add(z, r));
  }
  // Flatten each frame in (L, W, C) order.
  Var flat = reshape(permute(z, {0, 2, 3, 1}), {N, z.dim(1) * z.dim(2) * z.dim(3)});
  Var out = flat;
  if (cfg.projection_dim > 0) {
    require(weights.projection.value.rank() == 2 &&
                weights.projection.value.dim(0) == flat.dim(1),
            ErrorKind::dimension,
            "srcm projection expects " + std::to_string(flat.dim(1)) +
                " flattened features; grid does not match the weights");
    out = linear(flat, tape.param(weights.projection), tape.param(weights.projection_bias));
  }
  if (single) out = reshape(out, {out.dim(1)});
  return out;
}

Var srcm_forward_batch(Var x, const SrcmConfig& cfg, SrcmWeights& weights) {
  require(x.value().rank() == 5, ErrorKind::dimension,
          "srcm_forward_batch expects [M,k,l,w,c], got " + shape_str(x.shape()));
  const std::size_t M = x.dim(0), k = x.dim(1), l = x.dim(2), w = x.dim(3), c = x.dim(4);
  Var frames = reshape(permute(x, {0, 1, 4, 2, 3}), {M * k, c, l, w});
  Var features = srcm_forward(frames, cfg, weights);
  return reshape(features, {M, k, features.dim(1)});
}

}  // namespace dkstn
