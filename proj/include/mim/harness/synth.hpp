#pragma once

// Procedural tracking sequences with exact ground truth: one target, optional
// look-alike distractors, occluding bars and per-frame sensor noise.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mim/bbox.hpp"
#include "mim/frame.hpp"
#include "mim/rng.hpp"

namespace mim::harness {

enum class ShapeKind { kRect, kEllipse, kDiamond };
enum class Motion { kStatic, kLinear, kBounce };

using Color = std::array<double, 3>;

struct ObjectSpec {
  ShapeKind shape = ShapeKind::kRect;
  Color color{1.0, 0.2, 0.2};
  BBox start;              // box at frame 0
  double vx = 0.0, vy = 0.0;  // pixels per frame
  double growth = 0.0;     // relative size change per frame
  Motion motion = Motion::kLinear;
};

struct Occluder {
  std::size_t first = 0, last = 0;  // inclusive frame span
  BBox box;
  Color color{0.5, 0.5, 0.5};
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  std::size_t width = 64, height = 64;
  std::size_t frames = 24;
  ObjectSpec target;
  std::vector<ObjectSpec> distractors;
  std::vector<Occluder> occluders;
  double noise = 0.02;
  Color background{0.35, 0.4, 0.45};
};

struct SequenceDataset {
  std::string name;
  std::vector<Frame> frames;
  std::vector<BBox> gt;
  std::size_t size() const { return frames.size(); }
};

// Box of an object at frame t under its motion model.
BBox object_box(const ObjectSpec& o, std::size_t t, std::size_t width, std::size_t height);

// Throws DomainError if the target box leaves the canvas entirely in any frame.
SequenceDataset generate(const SyntheticScene& scene);

struct SceneMix {
  double p_static = 0.1;
  double p_bounce = 0.3;    // remainder is linear motion
  std::size_t max_distractors = 2;
  double p_occluder = 0.3;
  bool exactly_one_distractor = false;
  bool linear_only = false;
};

SyntheticScene random_scene(Rng& rng, std::size_t width, std::size_t height, std::size_t frames,
                            const SceneMix& mix);

// count scenes with seeds derived from base_seed.
std::vector<SequenceDataset> make_pool(std::uint64_t base_seed, std::size_t count,
                                       std::size_t width, std::size_t height, std::size_t frames,
                                       const SceneMix& mix);

// Held-out evaluation set: linear motion, exactly one distractor.
std::vector<SequenceDataset> make_eval_set(std::uint64_t base_seed, std::size_t count,
                                           std::size_t width, std::size_t height,
                                           std::size_t frames);

}  // namespace mim::harness
