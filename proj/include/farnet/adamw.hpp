// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "farnet/tensor.hpp"

namespace farnet {

struct AdamWConfig {
  double lr = 3e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, one pair per parameter, plus the shared step count.
struct AdamWState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamWState for_parameters(std::span<const Tensor> params);
};

/// One AdamW update with decoupled weight decay:
///   p <- p * (1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps)
/// `grads[i]` must match `params[i]` in size.
void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamWState& state,
                const AdamWConfig& config);

/// Convenience wrapper that reads each parameter's own gradient buffer.
void adamw_step(std::span<Tensor> params, AdamWState& state, const AdamWConfig& config);

}  // namespace farnet
