#include "mim/harness/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mim/error.hpp"
#include "mim/track_head.hpp"

namespace mim::harness {
namespace {

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is) {
  std::string tok;
  char ch;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(is, rest);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.ppm", i);
  return buf;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Frame& frame) {
  MIM_CHECK(frame.channels == 3, ShapeError, "PPM frames must have 3 channels");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  MIM_CHECK(os, FormatError, "cannot open " + path.string() + " for writing");
  os << "P6\n" << frame.width << ' ' << frame.height << "\n255\n";
  std::vector<unsigned char> buf(frame.width * frame.height * 3);
  for (std::size_t y = 0; y < frame.height; ++y)
    for (std::size_t x = 0; x < frame.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        buf[(y * frame.width + x) * 3 + c] = to_byte(frame.at(c, y, x));
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  MIM_CHECK(os.good(), FormatError, "failed writing " + path.string());
}

Frame read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  MIM_CHECK(is, FormatError, "cannot open frame " + path.string());
  MIM_CHECK(header_token(is) == "P6", FormatError, path.string() + ": not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(header_token(is));
    h = std::stoul(header_token(is));
    maxval = std::stoul(header_token(is));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  MIM_CHECK(w > 0 && h > 0 && w <= 16384 && h <= 16384, FormatError,
            path.string() + ": implausible image size");
  MIM_CHECK(maxval == 255, FormatError, path.string() + ": only 8-bit PPM is supported");
  std::vector<unsigned char> buf(w * h * 3);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  MIM_CHECK(is.gcount() == static_cast<std::streamsize>(buf.size()), FormatError,
            path.string() + ": truncated pixel data");
  Frame f(3, h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) f.at(c, y, x) = buf[(y * w + x) * 3 + c] / 255.0;
  return f;
}

Frame quantize(const Frame& f) {
  Frame out = f;
  for (auto& v : out.data) v = to_byte(v) / 255.0;
  return out;
}

void write_sequence(const std::filesystem::path& dir, const SequenceDataset& seq) {
  MIM_CHECK(seq.frames.size() == seq.gt.size(), DomainError,
            "sequence has mismatched frame and ground-truth counts");
  std::filesystem::create_directories(dir / "frames");
  for (std::size_t i = 0; i < seq.frames.size(); ++i)
    write_ppm(dir / "frames" / frame_name(i), seq.frames[i]);
  head::write_trajectory(dir / "groundtruth.txt", seq.gt);
}

SequenceDataset read_sequence(const std::filesystem::path& dir) {
  SequenceDataset seq;
  seq.name = dir.filename().string();
  seq.gt = head::read_trajectory(dir / "groundtruth.txt");
  for (std::size_t i = 0; i < seq.gt.size(); ++i)
    seq.frames.push_back(read_ppm(dir / "frames" / frame_name(i)));
  MIM_CHECK(!std::filesystem::exists(dir / "frames" / frame_name(seq.gt.size())), FormatError,
            dir.string() + ": more frames than ground-truth lines");
  return seq;
}

}  // namespace mim::harness
