#include "treediff/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "lz4.h"
#include "treediff/render.hpp"

namespace treediff {

namespace {

png_uint_32 format_for(int channels) {
  if (channels == 1) return PNG_FORMAT_GRAY;
  if (channels == 3) return PNG_FORMAT_RGB;
  throw CanvasError("PNG export supports 1 or 3 channels, got " + std::to_string(channels));
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Canvas& c) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(c.width);
  image.height = static_cast<png_uint_32>(c.height);
  image.format = format_for(c.channels);
  const auto raw = quantize(c);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw CanvasError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw CanvasError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

Canvas decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw CanvasError(std::string("PNG decode failed: ") + image.message);
  }
  const bool colour = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Canvas c;
  c.width = static_cast<int>(image.width);
  c.height = static_cast<int>(image.height);
  c.channels = colour ? 3 : 1;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&image);
    throw CanvasError(std::string("PNG decode failed: ") + image.message);
  }
  c.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) c.pixels[i] = static_cast<float>(raw[i]) / 255.0f;
  return c;
}

void write_png(const std::filesystem::path& path, const Canvas& c) {
  const auto bytes = encode_png(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CanvasError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CanvasError("cannot write '" + path.string() + "'");
}

Canvas read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CanvasError("cannot read '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

Canvas quantized_copy(const Canvas& c) {
  Canvas q = c;
  const auto raw = quantize(c);
  for (std::size_t i = 0; i < raw.size(); ++i) q.pixels[i] = static_cast<float>(raw[i]) / 255.0f;
  return q;
}

int lz4_compressed_size(const Canvas& c) {
  const auto raw = quantize(c);
  const int src = static_cast<int>(raw.size());
  std::vector<char> dst(static_cast<std::size_t>(LZ4_compressBound(src)));
  const int n = LZ4_compress_default(reinterpret_cast<const char*>(raw.data()), dst.data(), src, static_cast<int>(dst.size()));
  if (n <= 0) throw CanvasError("LZ4 compression failed");
  return n;
}

}  // namespace treediff
