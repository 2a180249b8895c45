#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "abm/graph.hpp"

namespace abm::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t max_coordinates = 200;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Builds a fresh graph for every loss evaluation, so `loss` must be a pure
/// function of the parameter values (re-seed any rng inside it).
using LossBuilder = std::function<Var(Graph<double>&)>;

/// Compares backprop gradients with central differences on up to
/// `max_coordinates` coordinates. Coordinates with a nonzero analytic
/// gradient are sampled first; zero-gradient ones only fill the remainder.
/// Leaves parameter values unchanged and gradients zeroed.
GradCheckResult grad_check(ParameterStore<double>& params, const LossBuilder& loss,
                           const GradCheckOptions& options = {});

}  // namespace abm::nn
