#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "posekit/autodiff.hpp"
#include "posekit/rng.hpp"

namespace posekit::test {

inline double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

struct GradCheckResult {
  double max_rel = 0;
  int checked = 0;
};

// Reverse-mode gradients vs central finite differences (step 1e-5, double
// precision) on `probes` random entries of the leaf tensors. The builder
// must construct a fresh graph from the given leaves and return a scalar.
using GraphBuilder = std::function<ad::Var(const std::vector<ad::Var>&)>;

inline GradCheckResult grad_check(const GraphBuilder& build, const std::vector<Tensor>& inputs,
                                  int probes, Rng& rng, double step = 1e-5) {
  std::vector<ad::Var> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(ad::Var::leaf(t.clone(), true));
  ad::backward(build(leaves));

  GradCheckResult res;
  for (int p = 0; p < probes; ++p) {
    const int ti = rng.uniform_int(0, static_cast<int>(inputs.size()) - 1);
    const std::int64_t j = rng.uniform_int(0, static_cast<int>(inputs[ti].numel()) - 1);
    auto eval = [&](double delta) {
      std::vector<ad::Var> vars;
      vars.reserve(inputs.size());
      for (std::size_t q = 0; q < inputs.size(); ++q) {
        Tensor t = inputs[q].clone();
        if (static_cast<int>(q) == ti) t[j] += delta;
        vars.push_back(ad::Var::constant(std::move(t)));
      }
      return build(vars).val()[0];
    };
    const double fd = (eval(step) - eval(-step)) / (2.0 * step);
    const double rv = leaves[ti].grad().allocated() ? leaves[ti].grad()[j] : 0.0;
    res.max_rel = std::max(res.max_rel, rel_err(fd, rv));
    ++res.checked;
  }
  return res;
}

}  // namespace posekit::test
