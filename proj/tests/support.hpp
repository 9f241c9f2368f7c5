// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "farnet/nn.hpp"
#include "farnet/rng.hpp"
#include "farnet/tensor.hpp"

namespace farnet::testing {

inline constexpr double kFiniteDifferenceStep = 1e-5;
// Gradients smaller than this are compared absolutely rather than relatively.
inline constexpr double kRelativeErrorFloor = 1e-6;

inline double relative_error(double a, double b, double floor = kRelativeErrorFloor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, bool requires_grad = true, double stddev = 1.0) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& x : t.data()) x = rng.normal(0.0, stddev);
  return t;
}

struct GradientReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Autodiff gradient of `loss_fn` vs central finite differences over every
/// entry of every tensor in `params`.
inline GradientReport check_gradients(const NamedParameters& params, const std::function<Tensor()>& loss_fn,
                                      double h = kFiniteDifferenceStep, double floor = kRelativeErrorFloor) {
  for (auto& [name, t] : params) {
    Tensor handle = t;
    handle.zero_grad();
  }
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = loss_fn();
  }
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& [name, t] : params) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.size(), 0.0);
    }
  }

  GradientReport report;
  NoGradScope no_grad;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor t = params[p].second;
    auto data = t.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss_fn().item();
      data[i] = saved - h;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[p][i], numeric, floor);
      ++report.checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst = params[p].first + "[" + std::to_string(i) + "]";
        report.worst_analytic = analytic[p][i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace farnet::testing
