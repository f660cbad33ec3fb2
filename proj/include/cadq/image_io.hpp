#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cadq/render.hpp"

namespace cadq {

struct ImageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;
};

std::vector<std::uint8_t> encode_png_rgb(int width, int height, std::span<const Rgb> pixels);
RgbImage decode_png_rgb(std::span<const std::uint8_t> png);

void write_png_rgb(const std::filesystem::path& path, int width, int height, std::span<const Rgb> pixels);
/// Face-id buffer as 16-bit grayscale: id + 1, background 0.
void write_face_id_png(const std::filesystem::path& path, const RenderBuffers& buffers);
std::vector<std::uint16_t> read_png_gray16(const std::filesystem::path& path, int& width, int& height);

/// Raw float32 little-endian depth with a 16-byte header: "CQDEPTH\0", u32 width, u32 height.
void write_depth(const std::filesystem::path& path, const RenderBuffers& buffers);
std::vector<float> read_depth(const std::filesystem::path& path, int& width, int& height);

/// Writes `<stem>.png`, `<stem>_faceid.png` and `<stem>.depth` into `dir`.
void export_render(const RenderBuffers& buffers, const std::filesystem::path& dir, const std::string& stem);

}  // namespace cadq
