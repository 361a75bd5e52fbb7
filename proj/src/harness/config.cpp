#include "mim/harness/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "mim/error.hpp"

namespace mim::harness {
namespace {

using nlohmann::json;

const std::array<std::pair<rat::Fusion, const char*>, 4> kFusionNames{{
    {rat::Fusion::kRetrievalMean, "retrieval_mean"},
    {rat::Fusion::kSimpleMean, "simple_mean"},
    {rat::Fusion::kCosineDecay, "cosine_decay"},
    {rat::Fusion::kRetrievalDecay, "retrieval_decay"},
}};

const std::array<std::pair<enc::Injection, const char*>, 4> kInjectionNames{{
    {enc::Injection::kQueryAttention, "query_attention"},
    {enc::Injection::kAdditive, "additive"},
    {enc::Injection::kConcatenate, "concatenate"},
    {enc::Injection::kKeyValueAttention, "kv_attention"},
}};

template <class E, std::size_t N>
E parse_enum(const std::array<std::pair<E, const char*>, N>& table, const std::string& s,
             const char* field) {
  for (const auto& [v, name] : table)
    if (s == name) return v;
  std::string options;
  for (const auto& [v, name] : table) options += std::string(options.empty() ? "" : ", ") + name;
  throw DomainError(std::string(field) + ": unknown value '" + s + "' (expected one of " +
                    options + ")");
}

template <class E, std::size_t N>
std::string enum_name(const std::array<std::pair<E, const char*>, N>& table, E v) {
  for (const auto& [e, name] : table)
    if (e == v) return name;
  return "?";
}

#define MIM_CONFIG_FIELDS(X)                                                                    \
  X(frame_size) X(canvas_size) X(search_factor) X(patch) X(dim) X(state) X(depth) X(window) X(stride) X(temporal) X(retrieval) \
  X(head_hidden) X(score_window) X(tau) X(top_k) X(memory_capacity) X(crop_factor) X(template_context)        \
  X(crop_size) X(light_patch) X(light_width) X(light_state) X(embed_dim) X(steps) X(batch)     \
  X(warmup) X(lr) X(weight_decay) X(grad_clip) X(aug_shift) X(aug_scale) X(memory_crops)       \
  X(pool_size) X(pool_frames) X(pool_seed) X(eval_sequences) X(eval_frames) X(eval_seed) X(seed) \
  X(ablation_axes)

void check_in(std::size_t v, std::set<std::size_t> allowed, const char* field) {
  if (allowed.count(v)) return;
  std::ostringstream os;
  os << field << " = " << v << " is not one of {";
  bool first = true;
  for (auto a : allowed) os << (first ? "" : ", ") << a, first = false;
  os << "}";
  throw DomainError(os.str());
}

}  // namespace

std::string to_string(rat::Fusion f) { return enum_name(kFusionNames, f); }
std::string to_string(enc::Injection i) { return enum_name(kInjectionNames, i); }

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) { MIM_CHECK(ok, DomainError, msg); };
  require(patch > 0 && frame_size > 0 && frame_size % patch == 0,
          "frame_size must be a positive multiple of patch");
  require(canvas_size > 0, "canvas_size must be positive");
  require(search_factor > 0.0, "search_factor must be positive");
  require(dim > 0 && state > 0, "dim and state must be positive");
  require(depth >= 1, "depth must be at least 1");
  require(window >= 1, "window must be at least 1");
  require(stride >= 1, "stride must be at least 1");
  require(head_hidden > 0, "head_hidden must be positive");
  require(tau > -1.0 && tau <= 1.0, "tau must lie in (-1, 1]");
  require(top_k >= 1, "top_k must be at least 1");
  require(memory_capacity >= 1, "memory_capacity must be at least 1");
  require(crop_factor >= 1.0, "crop_factor must be >= 1");
  require(template_context > 0.0, "template_context must be positive");
  require(light_patch > 0 && crop_size % light_patch == 0,
          "crop_size must be a positive multiple of light_patch");
  require(light_width > 0 && light_state > 0 && embed_dim > 0, "light encoder sizes must be positive");
  require(batch >= 1, "batch must be at least 1");
  require(lr > 0.0, "lr must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(aug_shift >= 0.0 && aug_scale >= 0.0 && aug_scale < 1.0, "augmentation ranges invalid");
  require(pool_size >= 1 && pool_frames >= 2, "pool needs at least one sequence of two frames");
  require(eval_sequences >= 1 && eval_frames >= 2, "eval set needs at least one sequence of two frames");
  if (ablation_axes) {
    check_in(patch, {24, 36, 48}, "patch");
    check_in(depth, {12, 24, 36}, "depth");
    check_in(window, {4, 8, 16}, "window");
    check_in(top_k, {3, 5, 7, 9}, "top_k");
  }
}

RunConfig full_size_config() {
  RunConfig c;
  c.frame_size = 256;
  c.patch = 16;
  c.dim = 384;
  c.state = 16;
  c.depth = 24;
  c.window = 8;
  c.stride = 2;
  c.head_hidden = 384;
  return c;
}

RunConfig with_variant(RunConfig cfg, const std::string& variant) {
  if (variant == "full") {
    cfg.temporal = cfg.retrieval = true;
  } else if (variant == "no_temporal") {
    cfg.temporal = false;
    cfg.retrieval = true;
  } else if (variant == "no_retrieval") {
    cfg.temporal = true;
    cfg.retrieval = false;
  } else if (variant == "no_both") {
    cfg.temporal = cfg.retrieval = false;
  } else {
    throw DomainError("unknown variant '" + variant +
                      "' (expected full, no_temporal, no_retrieval or no_both)");
  }
  return cfg;
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  MIM_CHECK(j.is_object(), FormatError, "config must be a JSON object");
  RunConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    try {
#define X(name)                                                                   \
  if (key == #name) {                                                             \
    if constexpr (std::is_unsigned_v<decltype(c.name)>)                           \
      MIM_CHECK(!it.value().is_number_integer() || it.value().get<long long>() >= 0, \
                FormatError, "config field '" + key + "' must be non-negative");   \
    it.value().get_to(c.name);                                                    \
    continue;                                                                     \
  }
      MIM_CONFIG_FIELDS(X)
#undef X
      if (key == "fusion") {
        c.fusion = parse_enum(kFusionNames, it.value().get<std::string>(), "fusion");
      } else if (key == "injection") {
        c.injection = parse_enum(kInjectionNames, it.value().get<std::string>(), "injection");
      } else {
        throw FormatError("unknown config key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw FormatError("config field '" + key + "' has the wrong type: " + e.what());
    }
  }
  c.validate();
  return c;
}

std::string dump_config(const RunConfig& c) {
  json j = json::object();
#define X(name) j[#name] = c.name;
  MIM_CONFIG_FIELDS(X)
#undef X
  j["fusion"] = to_string(c.fusion);
  j["injection"] = to_string(c.injection);
  return j.dump(2) + "\n";
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  MIM_CHECK(is, FormatError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace mim::harness
