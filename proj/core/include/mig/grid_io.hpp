#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mig/field.hpp"

namespace mig {

/// Multi-channel float grid as stored on disk.
///
/// File layout (all little-endian):
///   bytes 0-3   magic "MIGF"
///   bytes 4-5   format version (uint16, currently 1)
///   bytes 6-7   channel count (uint16)
///   bytes 8-11  height (uint32)
///   bytes 12-15 width (uint32)
///   payload     channels * height * width float32, channel-major then row-major
struct FloatGrid {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    FloatGrid() = default;
    FloatGrid(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w) {}

    float &at(int c, int row, int col) { return data[(static_cast<std::size_t>(c) * height + row) * width + col]; }
    float at(int c, int row, int col) const { return data[(static_cast<std::size_t>(c) * height + row) * width + col]; }

    /// Channel c as a double image.
    Image channel(int c) const;
    static FloatGrid from_images(const std::vector<Image> &channels);
};

inline constexpr std::uint16_t kFloatGridVersion = 1;

std::vector<unsigned char> encode_grid(const FloatGrid &grid);
FloatGrid decode_grid(const std::vector<unsigned char> &bytes, const std::string &what = "grid");

void write_grid(const std::filesystem::path &path, const FloatGrid &grid);
FloatGrid read_grid(const std::filesystem::path &path);

/// Whole-file helpers shared by the binary formats.
std::vector<unsigned char> read_file_bytes(const std::filesystem::path &path);
void write_file_bytes(const std::filesystem::path &path, const std::vector<unsigned char> &bytes);

} // namespace mig
