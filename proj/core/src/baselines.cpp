#include "tsr/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "tsr/errors.hpp"

namespace tsr {

std::string_view to_string(FirstOrderMethod method) {
  switch (method) {
    case FirstOrderMethod::Adam:
      return "Adam";
    case FirstOrderMethod::RMSProp:
      return "RMSProp";
    case FirstOrderMethod::SgdMomentum:
      return "SgdMomentum";
  }
  return "unknown";
}

FirstOrderMethod parse_first_order(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key == "adam") return FirstOrderMethod::Adam;
  if (key == "rmsprop") return FirstOrderMethod::RMSProp;
  if (key == "sgd-momentum" || key == "sgdmomentum" || key == "momentum") {
    return FirstOrderMethod::SgdMomentum;
  }
  throw ConfigError("unknown first-order method '" + std::string(name) + "'");
}

FirstOrderState make_first_order(FirstOrderMethod method, const BlockVector& params,
                                 double step_size) {
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
  FirstOrderState s;
  s.method = method;
  s.step_size = step_size;
  s.moment1 = BlockVector::zeros_like(params);
  s.moment2 = BlockVector::zeros_like(params);
  s.velocity = BlockVector::zeros_like(params);
  return s;
}

void first_order_step(FirstOrderState& state, BlockVector& params, const BlockVector& grad) {
  if (!grad.same_shape(params)) throw ContractError("gradient shape mismatch");
  if (!grad.all_finite()) throw NumericError("non-finite gradient");
  for (double c : {state.beta1, state.beta2, state.rho, state.momentum}) {
    if (c < 0.0 || c >= 1.0) throw ConfigError("decay coefficients must lie in [0, 1)");
  }
  if (!(state.epsilon_hat > 0.0)) throw ConfigError("epsilon_hat must be positive");
  if (!state.moment1.same_shape(params)) {
    state.moment1 = BlockVector::zeros_like(params);
    state.moment2 = BlockVector::zeros_like(params);
    state.velocity = BlockVector::zeros_like(params);
  }
  ++state.t;
  const double step = state.step_size;
  const double eps = state.epsilon_hat;

  for (std::size_t l = 0; l < params.num_blocks(); ++l) {
    const auto g = grad.block(l).array();
    auto w = params.block(l).array();
    switch (state.method) {
      case FirstOrderMethod::Adam: {
        auto m = state.moment1.block(l).array();
        auto v = state.moment2.block(l).array();
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.square();
        const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
        const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
        w -= step * (m / c1) / ((v / c2).sqrt() + eps);
        break;
      }
      case FirstOrderMethod::RMSProp: {
        auto v = state.moment2.block(l).array();
        v = state.rho * v + (1.0 - state.rho) * g.square();
        w -= step * g / (v.sqrt() + eps);
        break;
      }
      case FirstOrderMethod::SgdMomentum: {
        auto u = state.velocity.block(l).array();
        u = state.momentum * u - step * g;
        w += u;
        break;
      }
    }
  }
}

}  // namespace tsr
