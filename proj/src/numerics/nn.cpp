#include "mim/nn.hpp"

#include <cmath>
#include <cstring>

#include "mim/error.hpp"
#include "mim/ops.hpp"

namespace mim::nn {

Var normal_param(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = rng.normal(0.0, stddev);
  return Var::parameter(std::move(t));
}

Var const_param(std::size_t rows, std::size_t cols, double value) {
  return Var::parameter(Tensor({rows, cols}, value));
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  return {normal_param(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng),
          const_param(1, out, 0.0)};
}

Var Linear::operator()(const Var& x) const { return ad::add_row(ad::matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LayerNorm LayerNorm::init(std::size_t dim) {
  return {const_param(1, dim, 1.0), const_param(1, dim, 0.0)};
}

Var LayerNorm::operator()(const Var& x) const { return ad::layer_norm(x, gain, bias); }

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".gain", gain);
  out.emplace_back(prefix + ".bias", bias);
}

Mlp Mlp::init(const std::vector<std::size_t>& dims, Rng& rng) {
  MIM_CHECK(dims.size() >= 2, DomainError, "MLP needs at least input and output dims");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    mlp.layers.push_back(Linear::init(dims[i], dims[i + 1], rng));
  return mlp;
}

Var Mlp::operator()(const Var& x) const {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = ad::gelu(h);
  }
  return h;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void Mlp::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(prefix + ".layer" + std::to_string(i), out);
}

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& [name, v] : params) n += v.size();
  return n;
}

std::uint64_t checksum(const ParamList& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, v] : params) {
    mix(name.data(), name.size());
    mix(v.value().data(), v.size() * sizeof(double));
  }
  return h;
}

}  // namespace mim::nn
