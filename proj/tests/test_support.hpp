#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "lasca/lasca.hpp"

namespace lasca::test {

inline DesignGenConfig small_design_config(std::size_t registers = 24, std::size_t gates = 300, std::size_t depth = 8) {
  DesignGenConfig c;
  c.registers = registers;
  c.combinational_gates = gates;
  c.max_logic_depth = depth;
  c.paths_per_endpoint = 6;
  return c;
}

inline Design small_design(std::uint64_t seed, std::size_t registers = 24, std::size_t gates = 300) {
  return generate_design(small_design_config(registers, gates), seed);
}

// Silicon with every noise source switched off.
inline SiliconConfig noiseless_silicon() {
  SiliconConfig c;
  c.pv.sigma_d = 0.0;
  c.voltage = VoltageNoiseModel::quiet();
  c.persistent_derivatives = {1.0};
  return c;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lasca_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a ReLU/PReLU kink
};

inline double half_sse(const Mlp& net, const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
  double l = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = net.forward(xs[i]) - ys[i];
    l += 0.5 * e * e;
  }
  return l;
}

inline std::vector<bool> kink_signs(const Mlp& net, const std::vector<std::vector<double>>& xs) {
  std::vector<bool> s;
  for (const auto& x : xs) {
    for (double z : net.kink_preactivations(x)) s.push_back(z > 0.0);
  }
  return s;
}

// Backprop gradient of sum 0.5 (f(x) - y)^2 against central differences.
// Relative error is |a - n| / max(|a|, |n|, 1e-6).
inline GradCheck gradient_check(Mlp net, const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
                                double eps = 1e-4) {
  const auto theta = net.parameters();
  std::vector<double> grad(theta.size(), 0.0);
  Mlp::Workspace ws;
  for (std::size_t i = 0; i < xs.size(); ++i) net.accumulate_gradient(xs[i], ys[i], grad, ws);
  const auto base_signs = kink_signs(net, xs);
  GradCheck r;
  auto p = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    p[k] = theta[k] + eps;
    net.set_parameters(p);
    const double up = half_sse(net, xs, ys);
    const bool cross_up = kink_signs(net, xs) != base_signs;
    p[k] = theta[k] - eps;
    net.set_parameters(p);
    const double down = half_sse(net, xs, ys);
    const bool cross_down = kink_signs(net, xs) != base_signs;
    p[k] = theta[k];
    if (cross_up || cross_down) {
      ++r.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(grad[k]), std::abs(numeric), 1e-6});
    r.max_rel_err = std::max(r.max_rel_err, std::abs(grad[k] - numeric) / denom);
    ++r.checked;
  }
  return r;
}

// A random net (1 to 3 hidden layers) with Gaussian weights and biases, and a
// small random batch to differentiate on.
struct GradProblem {
  Mlp net;
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
};

inline GradProblem random_grad_problem(std::mt19937_64& rng, Activation act) {
  std::uniform_int_distribution<std::size_t> layers(1, 3);
  std::uniform_int_distribution<std::size_t> width(2, 9);
  std::uniform_int_distribution<std::size_t> inputs(3, 12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::size_t> sizes{inputs(rng)};
  const std::size_t h = layers(rng);
  for (std::size_t l = 0; l < h; ++l) sizes.push_back(width(rng));
  sizes.push_back(1);
  GradProblem g{Mlp(sizes, std::vector<Activation>(h, act)), {}, {}};
  auto theta = g.net.parameters();
  std::size_t k = 0;
  for (const auto& layer : g.net.layers()) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t i = 0; i < layer.w.size(); ++i) theta[k++] = scale * n(rng);
    for (std::size_t i = 0; i < layer.b.size(); ++i) theta[k++] = 0.3 * n(rng);
    for (std::size_t i = 0; i < layer.alpha.size(); ++i) theta[k++] = 0.1 + 0.2 * std::abs(n(rng));
  }
  g.net.set_parameters(theta);
  for (int s = 0; s < 4; ++s) {
    std::vector<double> x(sizes.front());
    for (auto& v : x) v = n(rng);
    g.xs.push_back(std::move(x));
    g.ys.push_back(n(rng));
  }
  return g;
}

}  // namespace lasca::test
