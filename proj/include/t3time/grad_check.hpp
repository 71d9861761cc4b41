#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "t3time/tensor.hpp"

namespace t3time {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences for every coordinate of every tensor in `inputs` (leaves that
/// `f` closes over). Error per coordinate is
/// |analytic - numeric| / max(1, |analytic|).
///
/// `max_coords_per_input` > 0 checks an evenly strided subset instead.
/// Throws ContractError if two evaluations of `f` at the same point differ.
template <typename T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>()>& f,
                                  std::vector<Tensor<T>> inputs, double step = 1e-4,
                                  std::size_t max_coords_per_input = 0);

template <typename T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>()>& f, Tensor<T> x,
                                  double step = 1e-4) {
  return finite_diff_check<T>(f, std::vector<Tensor<T>>{std::move(x)}, step);
}

extern template GradCheckResult finite_diff_check<float>(const std::function<Tensor<float>()>&,
                                                         std::vector<Tensor<float>>, double,
                                                         std::size_t);
extern template GradCheckResult finite_diff_check<double>(const std::function<Tensor<double>()>&,
                                                          std::vector<Tensor<double>>, double,
                                                          std::size_t);

}  // namespace t3time
