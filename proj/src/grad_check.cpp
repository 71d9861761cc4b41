#include "t3time/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "t3time/errors.hpp"

namespace t3time {

template <typename T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>()>& f,
                                  std::vector<Tensor<T>> inputs, double step,
                                  std::size_t max_coords_per_input) {
  for (auto& x : inputs) {
    if (!x.defined() || !x.requires_grad()) {
      throw ContractError("finite_diff_check: inputs must be leaves that require grad");
    }
    x.zero_grad();
  }
  Tensor<T> loss = f();
  if (loss.numel() != 1) throw ContractError("finite_diff_check: f must be scalar-valued");
  loss.backward();

  auto eval = [&f] {
    NoGradGuard guard;
    return static_cast<double>(f().item());
  };
  if (eval() != eval() || eval() != static_cast<double>(loss.item())) {
    throw ContractError("finite_diff_check: f is not deterministic (dropout enabled?)");
  }

  GradCheckResult result;
  for (std::size_t ii = 0; ii < inputs.size(); ++ii) {
    auto& x = inputs[ii];
    std::vector<T> analytic(x.numel(), T(0));
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    auto data = x.mutable_values();
    const std::size_t stride =
        max_coords_per_input == 0 ? 1 : std::max<std::size_t>(1, data.size() / max_coords_per_input);
    for (std::size_t i = 0; i < data.size(); i += stride) {
      const T saved = data[i];
      data[i] = static_cast<T>(saved + step);
      const double up = eval();
      data[i] = static_cast<T>(saved - step);
      const double down = eval();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = static_cast<double>(analytic[i]);
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        result.worst_input = ii;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

template GradCheckResult finite_diff_check<float>(const std::function<Tensor<float>()>&,
                                                  std::vector<Tensor<float>>, double, std::size_t);
template GradCheckResult finite_diff_check<double>(const std::function<Tensor<double>()>&,
                                                   std::vector<Tensor<double>>, double, std::size_t);

}  // namespace t3time
