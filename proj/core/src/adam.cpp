#include "dkstn/adam.hpp"

#include <cmath>

#include "dkstn/error.hpp"

namespace dkstn {

void adam_step(const std::vector<Parameter*>& params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.emplace_back(p->value.shape(), 0.0);
      state.second_moment.emplace_back(p->value.shape(), 0.0);
    }
  }
  require(state.first_moment.size() == params.size(), ErrorKind::parameter,
          "optimizer state tracks " + std::to_string(state.first_moment.size()) +
              " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    require(state.first_moment[i].shape() == p.value.shape(), ErrorKind::parameter,
            "optimizer moment shape mismatch for '" + p.name + "'");
    if (!p.grad.all_finite()) fail(ErrorKind::training, "non-finite gradient in '" + p.name + "'");
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    auto w = p.value.data();
    auto g = p.grad.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double grad = g[j] + c.weight_decay * w[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * grad;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * grad * grad;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace dkstn
