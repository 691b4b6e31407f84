#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vdn::io {

using GrayImage8 = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GrayImage16 = Eigen::Array<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Binary (P5) PGM; 16-bit samples are written most significant byte first.
void write_pgm(const std::filesystem::path& path, const GrayImage8& image);
void write_pgm(const std::filesystem::path& path, const GrayImage16& image);

struct PgmImage {
  int width = 0, height = 0, max_value = 0;
  std::vector<std::uint16_t> samples;
};
PgmImage read_pgm(const std::filesystem::path& path);

/// Maps [0, 1] onto [0, max] rounding half away from zero.
std::uint16_t quantize_unit(double value, std::uint16_t max);

}  // namespace vdn::io
