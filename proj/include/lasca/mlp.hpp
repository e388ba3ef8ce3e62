#pragma once

// Fully connected feed-forward regressor with a linear scalar output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lasca/error.hpp"
#include "lasca/rng.hpp"

namespace lasca {

enum class Activation : std::uint8_t { Tanh, Sigmoid, Relu, Prelu };

inline constexpr Activation kAllActivations[] = {Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Prelu};

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Prelu: return "prelu";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  for (Activation a : kAllActivations) {
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown activation '" + std::string(s) + "'");
}

inline constexpr double kPreluInitSlope = 0.25;

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;
  std::vector<double> alpha;  // PReLU slopes, one per unit; empty otherwise
  Activation act = Activation::Relu;
  bool linear = false;  // output layer

  [[nodiscard]] double activate(std::size_t j, double z) const {
    if (linear) return z;
    switch (act) {
      case Activation::Tanh: return std::tanh(z);
      case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
      case Activation::Relu: return z > 0.0 ? z : 0.0;
      case Activation::Prelu: return z > 0.0 ? z : alpha[j] * z;
    }
    return z;
  }

  // d a / d z, given z and a = activate(z).
  [[nodiscard]] double derivative(std::size_t j, double z, double a) const {
    if (linear) return 1.0;
    switch (act) {
      case Activation::Tanh: return 1.0 - a * a;
      case Activation::Sigmoid: return a * (1.0 - a);
      case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
      case Activation::Prelu: return z > 0.0 ? 1.0 : alpha[j];
    }
    return 1.0;
  }

  [[nodiscard]] bool has_kink() const { return !linear && (act == Activation::Relu || act == Activation::Prelu); }
};

class Mlp {
 public:
  Mlp() = default;

  // sizes = {inputs, h1, ..., 1}; one activation per hidden layer.
  Mlp(std::vector<std::size_t> sizes, std::vector<Activation> hidden) {
    if (sizes.size() < 2 || sizes.back() != 1) throw Error(ErrorCode::InvalidArgument, "MLP needs sizes {in, ..., 1}");
    if (hidden.size() != sizes.size() - 2) throw Error(ErrorCode::InvalidArgument, "one activation per hidden layer");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      if (sizes[l] == 0) throw Error(ErrorCode::InvalidArgument, "layer sizes must be positive");
      DenseLayer layer;
      layer.in = sizes[l];
      layer.out = sizes[l + 1];
      layer.w.assign(layer.in * layer.out, 0.0);
      layer.b.assign(layer.out, 0.0);
      layer.linear = l + 2 == sizes.size();
      if (!layer.linear) {
        layer.act = hidden[l];
        if (layer.act == Activation::Prelu) layer.alpha.assign(layer.out, kPreluInitSlope);
      }
      layers_.push_back(std::move(layer));
    }
  }

  // Glorot-uniform weights, zero biases.
  void init(std::uint64_t seed) {
    rng::SplitMix64 eng(rng::derive_seed(seed, 0x696e6974ULL));
    for (auto& layer : layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (auto& w : layer.w) w = u(eng);
      std::fill(layer.b.begin(), layer.b.end(), 0.0);
      if (!layer.alpha.empty()) std::fill(layer.alpha.begin(), layer.alpha.end(), kPreluInitSlope);
    }
  }

  [[nodiscard]] std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
  [[nodiscard]] std::vector<DenseLayer>& layers() { return layers_; }

  [[nodiscard]] std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    if (layers_.empty()) return s;
    s.push_back(layers_.front().in);
    for (const auto& l : layers_) s.push_back(l.out);
    return s;
  }

  [[nodiscard]] std::vector<Activation> activations() const {
    std::vector<Activation> a;
    for (const auto& l : layers_) {
      if (!l.linear) a.push_back(l.act);
    }
    return a;
  }

  [[nodiscard]] double forward(std::span<const double> x) const {
    if (x.size() != input_size()) throw Error(ErrorCode::DimensionMismatch, "input has the wrong width");
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (const auto& layer : layers_) {
      next.assign(layer.out, 0.0);
      for (std::size_t j = 0; j < layer.out; ++j) {
        const double* row = layer.w.data() + j * layer.in;
        double z = layer.b[j];
        for (std::size_t i = 0; i < layer.in; ++i) z += row[i] * cur[i];
        next[j] = layer.activate(j, z);
      }
      cur.swap(next);
    }
    return cur[0];
  }

  // Parameters flattened as, per layer: weights, biases, PReLU slopes.
  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size() + l.alpha.size();
    return n;
  }

  [[nodiscard]] std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto& l : layers_) {
      p.insert(p.end(), l.w.begin(), l.w.end());
      p.insert(p.end(), l.b.begin(), l.b.end());
      p.insert(p.end(), l.alpha.begin(), l.alpha.end());
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw Error(ErrorCode::DimensionMismatch, "parameter vector has the wrong length");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (auto* v : {&l.w, &l.b, &l.alpha}) {
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(k), p.begin() + static_cast<std::ptrdiff_t>(k + v->size()),
                  v->begin());
        k += v->size();
      }
    }
  }

  // Reusable per-sample buffers for backprop.
  struct Workspace {
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> a;  // a[0] = input
    std::vector<std::vector<double>> delta;
  };

  // Adds d/dtheta of 0.5 * (f(x) - y)^2 into `grad` (flattened like
  // parameters()); returns the squared-error term.
  double accumulate_gradient(std::span<const double> x, double y, std::span<double> grad, Workspace& ws) const {
    const std::size_t L = layers_.size();
    ws.z.resize(L);
    ws.a.resize(L + 1);
    ws.delta.resize(L);
    ws.a[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < L; ++l) {
      const auto& layer = layers_[l];
      ws.z[l].assign(layer.out, 0.0);
      ws.a[l + 1].assign(layer.out, 0.0);
      const auto& in = ws.a[l];
      for (std::size_t j = 0; j < layer.out; ++j) {
        const double* row = layer.w.data() + j * layer.in;
        double z = layer.b[j];
        for (std::size_t i = 0; i < layer.in; ++i) z += row[i] * in[i];
        ws.z[l][j] = z;
        ws.a[l + 1][j] = layer.activate(j, z);
      }
    }
    const double err = ws.a[L][0] - y;
    // Offsets of each layer's block in the flat vector.
    std::vector<std::size_t> offset(L);
    std::size_t k = 0;
    for (std::size_t l = 0; l < L; ++l) {
      offset[l] = k;
      k += layers_[l].w.size() + layers_[l].b.size() + layers_[l].alpha.size();
    }
    for (std::size_t l = L; l-- > 0;) {
      const auto& layer = layers_[l];
      auto& delta = ws.delta[l];
      delta.assign(layer.out, 0.0);
      for (std::size_t j = 0; j < layer.out; ++j) {
        double upstream = 0.0;
        if (l + 1 == L) {
          upstream = err;
        } else {
          const auto& nl = layers_[l + 1];
          for (std::size_t q = 0; q < nl.out; ++q) upstream += nl.w[q * nl.in + j] * ws.delta[l + 1][q];
        }
        delta[j] = upstream * layer.derivative(j, ws.z[l][j], ws.a[l + 1][j]);
        if (!layer.alpha.empty() && ws.z[l][j] <= 0.0) {
          grad[offset[l] + layer.w.size() + layer.b.size() + j] += upstream * ws.z[l][j];
        }
      }
      const auto& in = ws.a[l];
      double* gw = grad.data() + offset[l];
      double* gb = gw + layer.w.size();
      for (std::size_t j = 0; j < layer.out; ++j) {
        const double d = delta[j];
        if (d == 0.0) continue;
        double* row = gw + j * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) row[i] += d * in[i];
        gb[j] += d;
      }
    }
    return err * err;
  }

  // Pre-activations of every kinked unit, for finite-difference checks that
  // must know whether a perturbation crossed a kink.
  [[nodiscard]] std::vector<double> kink_preactivations(std::span<const double> x) const {
    std::vector<double> out;
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (const auto& layer : layers_) {
      next.assign(layer.out, 0.0);
      for (std::size_t j = 0; j < layer.out; ++j) {
        const double* row = layer.w.data() + j * layer.in;
        double z = layer.b[j];
        for (std::size_t i = 0; i < layer.in; ++i) z += row[i] * cur[i];
        if (layer.has_kink()) out.push_back(z);
        next[j] = layer.activate(j, z);
      }
      cur.swap(next);
    }
    return out;
  }

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace lasca
