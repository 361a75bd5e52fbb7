#pragma once

// Parameter checkpoint container.
//
//   "MIMCKPT v1\n"
//   repeated until EOF:
//     u32   name length
//     bytes name
//     u32   rank
//     u64   dims[rank]
//     f64   values[prod(dims)]
//
// All integers and floats are little-endian.

#include <filesystem>
#include <string>
#include <vector>

#include "mim/nn.hpp"
#include "mim/tensor.hpp"

namespace mim::checkpoint {

struct NamedArray {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

void write(const std::filesystem::path& path, const std::vector<NamedArray>& entries);
std::vector<NamedArray> read(const std::filesystem::path& path);

std::vector<NamedArray> snapshot(const nn::ParamList& params);
// Copies values into matching parameters. Every parameter must be present with
// an identical shape; extra entries are an error too.
void restore(const nn::ParamList& params, const std::vector<NamedArray>& entries);

}  // namespace mim::checkpoint
