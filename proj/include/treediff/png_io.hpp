#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "treediff/canvas.hpp"

namespace treediff {

/// 8-bit grayscale (1 channel) or RGB (3 channels) PNG. Values are stored as
/// round(v * 255). Encoding is deterministic.
std::vector<std::uint8_t> encode_png(const Canvas& c);
/// Decodes to 1 channel for gray images and 3 for colour; alpha is dropped.
Canvas decode_png(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const Canvas& c);
Canvas read_png(const std::filesystem::path& path);

/// Canvas as it reads back from PNG (8-bit quantisation applied).
Canvas quantized_copy(const Canvas& c);

/// Byte length of the LZ4 block compression (default level) of the raw
/// 8-bit row-major pixel buffer.
int lz4_compressed_size(const Canvas& c);

}  // namespace treediff
