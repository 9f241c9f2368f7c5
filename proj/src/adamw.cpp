// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/adamw.hpp"

#include <cmath>

#include "farnet/errors.hpp"

namespace farnet {

AdamWState AdamWState::for_parameters(std::span<const Tensor> params) {
  AdamWState state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamWState& state,
                const AdamWConfig& config) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw DimensionError("adamw_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].size() || state.first_moment[i].size() != params[i].size()) {
      throw DimensionError("adamw_step: parameter " + std::to_string(i) + " has shape " +
                           shape_string(params[i].shape()) + " but gradient has " +
                           std::to_string(grads[i].size()) + " entries");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - config.lr * config.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    const auto& g = grads[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      p[j] = p[j] * decay - config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

void adamw_step(std::span<Tensor> params, AdamWState& state, const AdamWConfig& config) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (auto& p : params) {
    if (p.has_grad()) {
      auto g = p.grad();
      grads.emplace_back(g.begin(), g.end());
    } else {
      grads.emplace_back(p.size(), 0.0);
    }
  }
  adamw_step(params, grads, state, config);
}

}  // namespace farnet
