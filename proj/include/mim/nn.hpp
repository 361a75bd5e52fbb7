#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mim/autodiff.hpp"
#include "mim/rng.hpp"

namespace mim::nn {

using ad::Var;

// Flat view over a model's trainable leaves; names are stable checkpoint keys.
using ParamList = std::vector<std::pair<std::string, Var>>;

Var normal_param(std::size_t rows, std::size_t cols, double stddev, Rng& rng);
Var const_param(std::size_t rows, std::size_t cols, double value);

struct Linear {
  Var weight;  // in × out
  Var bias;    // 1 × out

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  Var operator()(const Var& x) const;
  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
  Var gain;
  Var bias;

  static LayerNorm init(std::size_t dim);
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

enum class Activation { kGelu };

struct Mlp {
  std::vector<Linear> layers;
  Activation activation = Activation::kGelu;

  // dims = {in, hidden..., out}; activation between layers, none after the last.
  static Mlp init(const std::vector<std::size_t>& dims, Rng& rng);
  Var operator()(const Var& x) const;
  std::size_t parameter_count() const;
  void collect(const std::string& prefix, ParamList& out) const;
};

std::size_t parameter_count(const ParamList& params);
// FNV-1a over the raw bytes of every parameter, in list order.
std::uint64_t checksum(const ParamList& params);

}  // namespace mim::nn
