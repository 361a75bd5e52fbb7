#include "mim/checkpoint.hpp"

#include <fstream>
#include <map>

#include "mim/binary_io.hpp"
#include "mim/error.hpp"

namespace mim::checkpoint {
namespace {
constexpr char kHeader[] = "MIMCKPT v1\n";
constexpr std::uint32_t kMaxRank = 8;
}  // namespace

void write(const std::filesystem::path& path, const std::vector<NamedArray>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  MIM_CHECK(os, FormatError, "cannot open checkpoint for writing: " + path.string());
  os.write(kHeader, sizeof(kHeader) - 1);
  for (const auto& e : entries) {
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) io::put<std::uint64_t>(os, d);
    for (double v : e.value.values()) io::put<double>(os, v);
  }
  MIM_CHECK(os.good(), FormatError, "failed writing checkpoint " + path.string());
}

std::vector<NamedArray> read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  MIM_CHECK(is, FormatError, "cannot open checkpoint: " + path.string());
  std::string header(sizeof(kHeader) - 1, '\0');
  is.read(header.data(), static_cast<std::streamsize>(header.size()));
  MIM_CHECK(is && header == kHeader, FormatError, "bad checkpoint header in " + path.string());
  std::vector<NamedArray> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    NamedArray e;
    const auto len = io::get<std::uint32_t>(is, "name length");
    e.name.resize(len);
    is.read(e.name.data(), len);
    MIM_CHECK(is.gcount() == static_cast<std::streamsize>(len), FormatError, "truncated name");
    const auto rank = io::get<std::uint32_t>(is, "rank");
    MIM_CHECK(rank <= kMaxRank, FormatError, "implausible rank in checkpoint entry " + e.name);
    Shape shape(rank);
    for (auto& d : shape) d = io::get<std::uint64_t>(is, "dim");
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = io::get<double>(is, "value");
    e.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<NamedArray> snapshot(const nn::ParamList& params) {
  std::vector<NamedArray> out;
  out.reserve(params.size());
  for (const auto& [name, v] : params) out.push_back({name, v.value()});
  return out;
}

void restore(const nn::ParamList& params, const std::vector<NamedArray>& entries) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& e : entries) {
    MIM_CHECK(by_name.emplace(e.name, &e.value).second, FormatError,
              "duplicate checkpoint entry " + e.name);
  }
  MIM_CHECK(by_name.size() == params.size(), FormatError,
            "checkpoint has " + std::to_string(by_name.size()) + " entries, model expects " +
                std::to_string(params.size()));
  for (const auto& [name, v] : params) {
    auto it = by_name.find(name);
    MIM_CHECK(it != by_name.end(), FormatError, "checkpoint lacks parameter " + name);
    MIM_CHECK(it->second->shape() == v.shape(), FormatError,
              "shape mismatch for " + name + ": " + shape_str(it->second->shape()) + " vs " +
                  shape_str(v.shape()));
    ad::Var handle = v;
    handle.leaf_value() = *it->second;
  }
}

}  // namespace mim::checkpoint
