#pragma once

#include <cstdint>
#include <string_view>

#include "tsr/block_vector.hpp"

namespace tsr {

enum class FirstOrderMethod { Adam, RMSProp, SgdMomentum };

std::string_view to_string(FirstOrderMethod method);
/// "adam", "rmsprop", "sgd-momentum" (case-insensitive). Throws ConfigError.
FirstOrderMethod parse_first_order(std::string_view name);

struct FirstOrderState {
  FirstOrderMethod method = FirstOrderMethod::Adam;
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;
  double momentum = 0.9;
  double epsilon_hat = 1e-8;
  BlockVector moment1;
  BlockVector moment2;
  BlockVector velocity;
  std::uint64_t t = 0;
};

/// Fresh state with the method's customary defaults and zeroed accumulators
/// shaped like `params`.
FirstOrderState make_first_order(FirstOrderMethod method, const BlockVector& params,
                                 double step_size = 1e-3);

/// Applies one elementwise update in place.
///   Adam:        m = b1 m + (1-b1) g, v = b2 v + (1-b2) g^2,
///                w -= step * m_hat / (sqrt(v_hat) + eps)
///   RMSProp:     v = rho v + (1-rho) g^2, w -= step * g / (sqrt(v) + eps)
///   SgdMomentum: u = mu u - step g, w += u
/// Throws NumericError on a non-finite gradient.
void first_order_step(FirstOrderState& state, BlockVector& params, const BlockVector& grad);

}  // namespace tsr
