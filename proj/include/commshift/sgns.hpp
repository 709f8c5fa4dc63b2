#pragma once

#include <cmath>
#include <cstddef>

namespace commshift::vectorspace {

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// One SGD step of skip-gram negative sampling under the composed
// parametrization h = main + dev. labels[j] is 1 for the positive sample and 0
// for negatives; ctx[j] are output rows, updated in place. The deviation row
// alone pays the l2 penalty (lambda/2)*|dev|^2. h and grad_h are caller scratch
// of size dim. All gradients are taken at the pre-step parameters, so a step
// with lr=1 yields them exactly as old - new; tests rely on that.
template <typename T>
inline void sgns_step(T* __restrict main_row, T* __restrict dev_row, T* const* ctx,
                      const int* labels, std::size_t n_samples, std::size_t dim, T lr,
                      T lambda, T* __restrict h, T* __restrict grad_h) {
  for (std::size_t i = 0; i < dim; ++i) {
    h[i] = main_row[i] + dev_row[i];
    grad_h[i] = T(0);
  }
  for (std::size_t j = 0; j < n_samples; ++j) {
    T* __restrict v = ctx[j];
    T dot = T(0);
    for (std::size_t i = 0; i < dim; ++i) dot += h[i] * v[i];
    T g = sigmoid(dot) - T(labels[j]);
    for (std::size_t i = 0; i < dim; ++i) {
      T vi = v[i];
      grad_h[i] += g * vi;
      v[i] = vi - lr * g * h[i];
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    main_row[i] -= lr * grad_h[i];
    dev_row[i] -= lr * (grad_h[i] + lambda * dev_row[i]);
  }
}

// The objective sgns_step descends; only exercised by tests via finite
// differences, kept beside the step so the two stay in sync.
template <typename T>
inline T sgns_loss(const T* main_row, const T* dev_row, const T* const* ctx,
                   const int* labels, std::size_t n_samples, std::size_t dim, T lambda) {
  T loss = T(0);
  for (std::size_t j = 0; j < n_samples; ++j) {
    T dot = T(0);
    for (std::size_t i = 0; i < dim; ++i) dot += (main_row[i] + dev_row[i]) * ctx[j][i];
    loss -= std::log(sigmoid(labels[j] ? dot : -dot));
  }
  T pen = T(0);
  for (std::size_t i = 0; i < dim; ++i) pen += dev_row[i] * dev_row[i];
  return loss + lambda / T(2) * pen;
}

}  // namespace commshift::vectorspace
