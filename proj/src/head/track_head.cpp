#include "mim/track_head.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "mim/error.hpp"
#include "mim/ops.hpp"

namespace mim::head {

HeadParams HeadParams::init(std::size_t dim, std::size_t hidden, Rng& rng) {
  return {nn::LayerNorm::init(dim), nn::Mlp::init({dim, hidden, kColumns}, rng)};
}

void HeadParams::collect(const std::string& prefix, nn::ParamList& out) const {
  norm.collect(prefix + ".norm", out);
  mlp.collect(prefix + ".mlp", out);
}

Var HeadParams::operator()(const Var& tokens) const { return mlp(norm(tokens)); }

BBox decode_token(std::span<const double> raw, std::size_t token, const tok::PatchGeometry& g) {
  MIM_CHECK(raw.size() == kColumns, ShapeError, "head row must have 5 columns");
  const double k = static_cast<double>(g.patch);
  const double col = static_cast<double>(token % g.grid_cols());
  const double row = static_cast<double>(token / g.grid_cols());
  auto offset = [](double r) { return 0.5 + kOffsetSpan * (ad::sigmoid_value(r) - 0.5); };
  return BBox::from_center((col + offset(raw[kCx])) * k, (row + offset(raw[kCy])) * k,
                           ad::sigmoid_value(raw[kW]) * static_cast<double>(g.width),
                           ad::sigmoid_value(raw[kH]) * static_cast<double>(g.height));
}

Prediction decode(const Tensor& raw, const tok::PatchGeometry& g) {
  MIM_CHECK(raw.cols() == kColumns && raw.rows() == g.count(), ShapeError,
            "head output must be L×5, got " + shape_str(raw.shape()));
  std::size_t best = 0;
  for (std::size_t i = 1; i < raw.rows(); ++i)
    if (raw.at(i, kLogit) > raw.at(best, kLogit)) best = i;
  return {decode_token(raw.row_span(best), best, g), ad::sigmoid_value(raw.at(best, kLogit)), best};
}

Prediction decode(const Tensor& raw, const tok::PatchGeometry& g, std::span<const double> window) {
  MIM_CHECK(raw.cols() == kColumns && raw.rows() == g.count(), ShapeError,
            "head output must be L×5, got " + shape_str(raw.shape()));
  MIM_CHECK(window.size() == g.count(), ShapeError, "score window must have one entry per token");
  std::size_t best = 0;
  double best_v = ad::sigmoid_value(raw.at(0, kLogit)) * window[0];
  for (std::size_t i = 1; i < raw.rows(); ++i) {
    const double v = ad::sigmoid_value(raw.at(i, kLogit)) * window[i];
    if (v > best_v) best = i, best_v = v;
  }
  return {decode_token(raw.row_span(best), best, g), ad::sigmoid_value(raw.at(best, kLogit)), best};
}

std::vector<double> hann_window(const tok::PatchGeometry& g) {
  auto hann = [](std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
  };
  const auto rows = hann(g.grid_rows()), cols = hann(g.grid_cols());
  std::vector<double> out;
  out.reserve(g.count());
  for (double r : rows)
    for (double c : cols) out.push_back(r * c);
  return out;
}

Prediction predict(const HeadParams& head, const Var& tokens, const tok::PatchGeometry& g) {
  ad::NoGradGuard no_grad;
  return decode(head(tokens).value(), g);
}

std::size_t positive_token(const BBox& gt, const tok::PatchGeometry& g) {
  const double k = static_cast<double>(g.patch);
  auto cell = [k](double v, std::size_t n) {
    const double c = std::floor(v / k);
    if (c <= 0.0) return std::size_t{0};
    return std::min(static_cast<std::size_t>(c), n - 1);
  };
  return cell(gt.cy(), g.grid_rows()) * g.grid_cols() + cell(gt.cx(), g.grid_cols());
}

std::vector<std::size_t> regression_tokens(std::size_t positive, const tok::PatchGeometry& g) {
  const std::size_t rows = g.grid_rows(), cols = g.grid_cols();
  const std::size_t r0 = positive / cols, c0 = positive % cols;
  std::vector<std::size_t> out;
  for (std::size_t r = r0 > 0 ? r0 - 1 : 0; r <= std::min(r0 + 1, rows - 1); ++r)
    for (std::size_t c = c0 > 0 ? c0 - 1 : 0; c <= std::min(c0 + 1, cols - 1); ++c)
      out.push_back(r * cols + c);
  return out;
}

LossTerms loss(const Var& raw, const BBox& gt, const tok::PatchGeometry& g, const LossWeights& w) {
  MIM_CHECK(gt.valid(), DomainError, "loss: degenerate ground-truth box");
  MIM_CHECK(raw.cols() == kColumns && raw.rows() == g.count(), ShapeError,
            "loss: head output must be L×5");
  const std::size_t pos = positive_token(gt, g);
  const std::vector<std::size_t> tokens = regression_tokens(pos, g);
  const std::size_t n = tokens.size();
  const double k = static_cast<double>(g.patch);
  const double fw = static_cast<double>(g.width), fh = static_cast<double>(g.height);

  // Per-token constants, all n×1.
  Tensor base_x({n, 1}), base_y({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    base_x[i] = static_cast<double>(tokens[i] % g.grid_cols()) + 0.5 - 0.5 * kOffsetSpan;
    base_y[i] = static_cast<double>(tokens[i] / g.grid_cols()) + 0.5 - 0.5 * kOffsetSpan;
  }
  auto constant = [n](double v) { return Var::constant(Tensor({n, 1}, v)); };

  const Var r = ad::gather_rows(raw, tokens);
  auto column = [&](Column c) { return ad::sigmoid(ad::slice_cols(r, c, 1)); };
  // Normalized predicted center and size.
  const Var cx = ad::scale(ad::add(ad::scale(column(kCx), kOffsetSpan), Var::constant(base_x)), k / fw);
  const Var cy = ad::scale(ad::add(ad::scale(column(kCy), kOffsetSpan), Var::constant(base_y)), k / fh);
  const Var pw = column(kW);
  const Var ph = column(kH);
  const double gcx = gt.cx() / fw, gcy = gt.cy() / fh, gw = gt.w / fw, gh = gt.h / fh;
  const double inv_n = 1.0 / static_cast<double>(n);

  const Var l1 = ad::scale(
      ad::sum(ad::add(ad::add(ad::abs(ad::add_scalar(cx, -gcx)), ad::abs(ad::add_scalar(cy, -gcy))),
                      ad::add(ad::abs(ad::add_scalar(pw, -gw)), ad::abs(ad::add_scalar(ph, -gh))))),
      inv_n);

  const Var px0 = ad::sub(cx, ad::scale(pw, 0.5)), px1 = ad::add(cx, ad::scale(pw, 0.5));
  const Var py0 = ad::sub(cy, ad::scale(ph, 0.5)), py1 = ad::add(cy, ad::scale(ph, 0.5));
  const Var iw = ad::relu(ad::sub(ad::minimum(px1, constant(gcx + 0.5 * gw)),
                                  ad::maximum(px0, constant(gcx - 0.5 * gw))));
  const Var ih = ad::relu(ad::sub(ad::minimum(py1, constant(gcy + 0.5 * gh)),
                                  ad::maximum(py0, constant(gcy - 0.5 * gh))));
  const Var inter = ad::mul(iw, ih);
  const Var uni = ad::sub(ad::add_scalar(ad::mul(pw, ph), gw * gh), inter);
  const Var iou = ad::scale(ad::sum(ad::div(inter, uni)), inv_n);

  // The positive token carries half the weight, the negatives share the rest.
  const std::size_t L = g.count();
  Tensor targets({L, 1}), weights({L, 1});
  targets[pos] = 1.0;
  for (auto& v : weights.values()) v = L > 1 ? 0.5 / static_cast<double>(L - 1) : 0.0;
  weights[pos] = L > 1 ? 0.5 : 1.0;
  const Var bce = ad::bce_with_logits(ad::slice_cols(raw, kLogit, 1), targets, weights);

  LossTerms out;
  out.total = ad::add(ad::add(ad::scale(l1, w.l1), ad::scale(ad::add_scalar(ad::scale(iou, -1.0), 1.0), w.iou)),
                      ad::scale(bce, w.objectness));
  out.l1 = l1.value().item();
  out.iou = iou.value().item();
  out.bce = bce.value().item();
  return out;
}

TrackState step(TrackState state, const BBox& box, double score) {
  state.current = box;
  state.trajectory.push_back(box);
  state.scores.push_back(score);
  return state;
}

void write_trajectory(const std::filesystem::path& path, const std::vector<BBox>& boxes) {
  std::ofstream os(path, std::ios::trunc);
  MIM_CHECK(os, FormatError, "cannot open trajectory file for writing: " + path.string());
  os << std::setprecision(17);
  for (const auto& b : boxes) os << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
  MIM_CHECK(os.good(), FormatError, "failed writing " + path.string());
}

std::vector<BBox> read_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path);
  MIM_CHECK(is, FormatError, "cannot open trajectory file: " + path.string());
  std::vector<BBox> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    for (auto& ch : line)
      if (ch == ',' || ch == '\t') ch = ' ';
    std::istringstream ls(line);
    BBox b;
    MIM_CHECK(static_cast<bool>(ls >> b.x >> b.y >> b.w >> b.h), FormatError,
              path.string() + ":" + std::to_string(n) + ": expected x,y,w,h");
    out.push_back(b);
  }
  return out;
}

}  // namespace mim::head
