#pragma once

// On-disk sequences: frames/NNNN.ppm (binary P6, 8-bit) plus groundtruth.txt
// with one "x,y,w,h" line per frame.

#include <filesystem>

#include "mim/harness/synth.hpp"

namespace mim::harness {

void write_ppm(const std::filesystem::path& path, const Frame& frame);
// Throws FormatError on anything but an 8-bit P6 image.
Frame read_ppm(const std::filesystem::path& path);

// Pixel values are quantized to 8 bits on write.
void write_sequence(const std::filesystem::path& dir, const SequenceDataset& seq);
SequenceDataset read_sequence(const std::filesystem::path& dir);

// Rounds every value to the nearest 1/255 step, matching a write/read cycle.
Frame quantize(const Frame& f);

}  // namespace mim::harness
