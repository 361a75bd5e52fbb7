#include "mim/harness/synth.hpp"

#include <cmath>

#include "mim/error.hpp"

namespace mim::harness {
namespace {

// Triangle-wave reflection of p into [lo, hi].
double reflect(double p, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double r = std::fmod(p - lo, 2.0 * span);
  if (r < 0.0) r += 2.0 * span;
  return lo + (r <= span ? r : 2.0 * span - r);
}

bool inside(ShapeKind shape, const BBox& b, double px, double py) {
  if (px < b.x || py < b.y || px >= b.x + b.w || py >= b.y + b.h) return false;
  const double u = (px - b.cx()) / (0.5 * b.w), v = (py - b.cy()) / (0.5 * b.h);
  switch (shape) {
    case ShapeKind::kRect: return true;
    case ShapeKind::kEllipse: return u * u + v * v <= 1.0;
    case ShapeKind::kDiamond: return std::abs(u) + std::abs(v) <= 1.0;
  }
  return false;
}

void paint(Frame& f, ShapeKind shape, const BBox& b, const Color& color) {
  const long x0 = std::max(0L, static_cast<long>(std::floor(b.x)));
  const long y0 = std::max(0L, static_cast<long>(std::floor(b.y)));
  const long x1 = std::min(static_cast<long>(f.width), static_cast<long>(std::ceil(b.x + b.w)));
  const long y1 = std::min(static_cast<long>(f.height), static_cast<long>(std::ceil(b.y + b.h)));
  for (long y = y0; y < y1; ++y)
    for (long x = x0; x < x1; ++x)
      if (inside(shape, b, x + 0.5, y + 0.5))
        for (std::size_t c = 0; c < 3; ++c) f.at(c, y, x) = color[c];
}

Color random_color(Rng& rng) {
  // Saturated hue on the RGB cube edge.
  const double h = rng.uniform(0.0, 6.0);
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  Color c{};
  switch (static_cast<int>(h)) {
    case 0: c = {1, x, 0}; break;
    case 1: c = {x, 1, 0}; break;
    case 2: c = {0, 1, x}; break;
    case 3: c = {0, x, 1}; break;
    case 4: c = {x, 0, 1}; break;
    default: c = {1, 0, x}; break;
  }
  for (auto& v : c) v = 0.15 + 0.8 * v;
  return c;
}

double color_distance(const Color& a, const Color& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

ObjectSpec random_object(Rng& rng, std::size_t width, std::size_t height, std::size_t frames,
                         Motion motion) {
  ObjectSpec o;
  o.shape = static_cast<ShapeKind>(rng.index(3));
  o.color = random_color(rng);
  const double w = std::round(rng.uniform(7.0, 15.0));
  const double h = std::round(rng.uniform(7.0, 15.0));
  o.motion = motion;
  if (motion != Motion::kStatic) {
    o.vx = rng.uniform(-1.5, 1.5);
    o.vy = rng.uniform(-1.5, 1.5);
  }
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  double lo_x = 1.0, hi_x = W - w - 1.0, lo_y = 1.0, hi_y = H - h - 1.0;
  if (motion == Motion::kLinear) {
    // Keep the whole path on the canvas.
    const double span = static_cast<double>(frames - 1);
    lo_x = std::max(lo_x, lo_x - o.vx * span);
    hi_x = std::min(hi_x, hi_x - o.vx * span);
    lo_y = std::max(lo_y, lo_y - o.vy * span);
    hi_y = std::min(hi_y, hi_y - o.vy * span);
    if (hi_x < lo_x) { o.vx = 0.0; lo_x = 1.0; hi_x = W - w - 1.0; }
    if (hi_y < lo_y) { o.vy = 0.0; lo_y = 1.0; hi_y = H - h - 1.0; }
  }
  o.start = {std::round(rng.uniform(lo_x, hi_x)), std::round(rng.uniform(lo_y, hi_y)), w, h};
  return o;
}

}  // namespace

BBox object_box(const ObjectSpec& o, std::size_t t, std::size_t width, std::size_t height) {
  const double td = static_cast<double>(t);
  const double s = std::max(0.2, 1.0 + o.growth * td);
  const double w = o.start.w * s, h = o.start.h * s;
  double cx = o.start.cx(), cy = o.start.cy();
  if (o.motion != Motion::kStatic) {
    cx += o.vx * td;
    cy += o.vy * td;
  }
  if (o.motion == Motion::kBounce) {
    cx = reflect(cx, 0.5 * w, static_cast<double>(width) - 0.5 * w);
    cy = reflect(cy, 0.5 * h, static_cast<double>(height) - 0.5 * h);
  }
  return BBox::from_center(cx, cy, w, h);
}

SequenceDataset generate(const SyntheticScene& scene) {
  MIM_CHECK(scene.width > 0 && scene.height > 0 && scene.frames > 0, DomainError,
            "scene needs a positive canvas and frame count");
  MIM_CHECK(scene.target.start.valid(), DomainError, "target box must have positive area");
  const BBox canvas{0.0, 0.0, static_cast<double>(scene.width), static_cast<double>(scene.height)};
  Rng rng(scene.seed);

  // Static background texture: smooth gradient plus a few soft blobs.
  Frame background(3, scene.height, scene.width);
  std::array<double, 4> blob_x{}, blob_y{}, blob_a{};
  for (std::size_t i = 0; i < blob_x.size(); ++i) {
    blob_x[i] = rng.uniform(0.0, static_cast<double>(scene.width));
    blob_y[i] = rng.uniform(0.0, static_cast<double>(scene.height));
    blob_a[i] = rng.uniform(-0.12, 0.12);
  }
  const double gx = rng.uniform(-0.1, 0.1), gy = rng.uniform(-0.1, 0.1);
  for (std::size_t y = 0; y < scene.height; ++y)
    for (std::size_t x = 0; x < scene.width; ++x) {
      double v = gx * (static_cast<double>(x) / scene.width - 0.5) +
                 gy * (static_cast<double>(y) / scene.height - 0.5);
      for (std::size_t i = 0; i < blob_x.size(); ++i) {
        const double dx = static_cast<double>(x) - blob_x[i], dy = static_cast<double>(y) - blob_y[i];
        v += blob_a[i] * std::exp(-(dx * dx + dy * dy) / 120.0);
      }
      for (std::size_t c = 0; c < 3; ++c) background.at(c, y, x) = scene.background[c] + v;
    }

  SequenceDataset out;
  out.name = "synth-" + std::to_string(scene.seed);
  for (std::size_t t = 0; t < scene.frames; ++t) {
    const BBox tb = object_box(scene.target, t, scene.width, scene.height);
    MIM_CHECK(intersection_area(tb, canvas) > 0.0, DomainError,
              "target leaves the canvas at frame " + std::to_string(t));
    Frame f = background;
    for (const auto& d : scene.distractors)
      paint(f, d.shape, object_box(d, t, scene.width, scene.height), d.color);
    paint(f, scene.target.shape, tb, scene.target.color);
    for (const auto& occ : scene.occluders)
      if (t >= occ.first && t <= occ.last) paint(f, ShapeKind::kRect, occ.box, occ.color);
    for (auto& v : f.data) v = std::clamp(v + rng.normal(0.0, scene.noise), 0.0, 1.0);
    out.frames.push_back(std::move(f));
    out.gt.push_back(tb);
  }
  return out;
}

SyntheticScene random_scene(Rng& rng, std::size_t width, std::size_t height, std::size_t frames,
                            const SceneMix& mix) {
  SyntheticScene s;
  s.seed = rng.next();
  s.width = width;
  s.height = height;
  s.frames = frames;
  s.background = {rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5)};
  Motion motion = Motion::kLinear;
  if (!mix.linear_only) {
    const double u = rng.uniform();
    if (u < mix.p_static) motion = Motion::kStatic;
    else if (u < mix.p_static + mix.p_bounce) motion = Motion::kBounce;
  }
  s.target = random_object(rng, width, height, frames, motion);
  s.target.growth = mix.linear_only ? 0.0 : rng.uniform(-0.01, 0.01);
  const std::size_t n_distract =
      mix.exactly_one_distractor ? 1 : rng.index(mix.max_distractors + 1);
  for (std::size_t i = 0; i < n_distract; ++i) {
    ObjectSpec d = random_object(rng, width, height, frames, Motion::kBounce);
    // Same silhouette and size class, visibly different color.
    d.shape = s.target.shape;
    d.start.w = s.target.start.w;
    d.start.h = s.target.start.h;
    do {
      d.color = random_color(rng);
    } while (color_distance(d.color, s.target.color) < 0.6);
    s.distractors.push_back(d);
  }
  if (rng.uniform() < mix.p_occluder && frames > 4) {
    Occluder o;
    o.first = 1 + rng.index(frames - 3);
    o.last = std::min(frames - 1, o.first + 1 + rng.index(3));
    const double w = std::round(rng.uniform(3.0, 6.0));
    o.box = {std::round(rng.uniform(0.0, width - w)), 0.0, w, static_cast<double>(height)};
    const double g = rng.uniform(0.1, 0.9);
    o.color = {g, g, g};
    s.occluders.push_back(o);
  }
  return s;
}

std::vector<SequenceDataset> make_pool(std::uint64_t base_seed, std::size_t count,
                                       std::size_t width, std::size_t height, std::size_t frames,
                                       const SceneMix& mix) {
  Rng rng(base_seed);
  std::vector<SequenceDataset> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate(random_scene(rng, width, height, frames, mix)));
  return out;
}

std::vector<SequenceDataset> make_eval_set(std::uint64_t base_seed, std::size_t count,
                                           std::size_t width, std::size_t height,
                                           std::size_t frames) {
  SceneMix mix;
  mix.linear_only = true;
  mix.exactly_one_distractor = true;
  mix.p_occluder = 0.0;
  return make_pool(base_seed, count, width, height, frames, mix);
}

}  // namespace mim::harness
