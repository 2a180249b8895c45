#include "abm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "abm/rng.hpp"

namespace abm::nn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

namespace {

struct Coord {
  std::size_t param;
  std::size_t index;
};

void sample_into(std::vector<Coord>& pool, std::size_t count, Rng& rng, std::vector<Coord>& out) {
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    out.push_back(pool[i]);
  }
}

}  // namespace

GradCheckResult grad_check(ParameterStore<double>& params, const LossBuilder& loss,
                           const GradCheckOptions& options) {
  params.zero_grad();
  {
    Graph<double> g;
    g.backward(loss(g));
  }
  std::vector<Coord> nonzero, zero;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].grad.size(); ++i)
      (params[p].grad.data[i] != 0.0 ? nonzero : zero).push_back({p, i});

  Rng rng(options.seed);
  std::vector<Coord> picked;
  sample_into(nonzero, options.max_coordinates, rng, picked);
  if (picked.size() < options.max_coordinates)
    sample_into(zero, options.max_coordinates - picked.size(), rng, picked);

  std::vector<double> analytic;
  for (const Coord& c : picked) analytic.push_back(params[c.param].grad.data[c.index]);
  params.zero_grad();

  auto evaluate = [&] {
    Graph<double> g;
    return g.value(loss(g)).data[0];
  };

  GradCheckResult result;
  for (std::size_t k = 0; k < picked.size(); ++k) {
    double& x = params[picked[k].param].value.data[picked[k].index];
    const double saved = x;
    x = saved + options.eps;
    const double up = evaluate();
    x = saved - options.eps;
    const double down = evaluate();
    x = saved;
    const double numeric = (up - down) / (2.0 * options.eps);
    const double err = relative_error(analytic[k], numeric);
    ++result.checked;
    if (err > result.max_rel_error || k == 0) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      result.worst_parameter = params[picked[k].param].name;
      result.worst_index = picked[k].index;
      result.worst_analytic = analytic[k];
      result.worst_numeric = numeric;
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace abm::nn
