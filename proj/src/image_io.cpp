#include "cadq/image_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <png.h>

namespace cadq {

namespace {

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png_create_write_struct failed");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw ImageError("png_create_info_struct failed");
    }
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
  PngWriter(const PngWriter&) = delete;
  PngWriter& operator=(const PngWriter&) = delete;
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png_create_read_struct failed");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_read_struct(&png, nullptr, nullptr);
      throw ImageError("png_create_info_struct failed");
    }
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;
};

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void no_flush(png_structp) {}

struct ReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void read_bytes(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->data.size()) png_error(png, "truncated png");
  std::memcpy(out, cursor->data.data() + cursor->offset, length);
  cursor->offset += length;
}

// libpng reports errors through longjmp; rows are prepared before setjmp so nothing leaks.
std::vector<std::uint8_t> encode(int width, int height, int bit_depth, int color_type, const std::vector<png_bytep>& rows) {
  std::vector<std::uint8_t> bytes;
  PngWriter w;
  if (setjmp(png_jmpbuf(w.png))) throw ImageError("png encoding failed");
  png_set_write_fn(w.png, &bytes, append_bytes, no_flush);
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(w.png);
  png_write_image(w.png, const_cast<png_bytepp>(rows.data()));
  png_write_end(w.png, nullptr);
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb(int width, int height, std::span<const Rgb> pixels) {
  static_assert(sizeof(Rgb) == 3);
  if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ImageError("pixel count does not match image size");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(reinterpret_cast<const png_byte*>(pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width)));
  }
  return encode(width, height, 8, PNG_COLOR_TYPE_RGB, rows);
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> png) {
  PngReader r;
  ReadCursor cursor{png, 0};
  RgbImage image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png))) throw ImageError("png decoding failed");
  png_set_read_fn(r.png, &cursor, read_bytes);
  png_read_info(r.png, r.info);
  const auto width = png_get_image_width(r.png, r.info);
  const auto height = png_get_image_height(r.png, r.info);
  const auto color_type = png_get_color_type(r.png, r.info);
  if (png_get_bit_depth(r.png, r.info) == 16) png_set_strip_16(r.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(r.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);
  image.width = static_cast<int>(width);
  image.height = static_cast<int>(height);
  image.pixels.resize(static_cast<std::size_t>(width) * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = reinterpret_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * width);
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return image;
}

void write_png_rgb(const std::filesystem::path& path, int width, int height, std::span<const Rgb> pixels) {
  write_file(path, encode_png_rgb(width, height, pixels));
}

void write_face_id_png(const std::filesystem::path& path, const RenderBuffers& buffers) {
  std::vector<std::uint16_t> values(buffers.face_id.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto f = buffers.face_id[i];
    if (f >= 0xFFFF) throw ImageError("face id does not fit a 16-bit image");
    values[i] = static_cast<std::uint16_t>(f + 1);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(buffers.height));
  for (int y = 0; y < buffers.height; ++y) {
    rows[static_cast<std::size_t>(y)] = reinterpret_cast<png_bytep>(values.data() + buffers.index(0, y));
  }
  write_file(path, encode(buffers.width, buffers.height, 16, PNG_COLOR_TYPE_GRAY, rows));
}

std::vector<std::uint16_t> read_png_gray16(const std::filesystem::path& path, int& width, int& height) {
  const auto bytes = read_file(path);
  PngReader r;
  ReadCursor cursor{bytes, 0};
  std::vector<std::uint16_t> values;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png))) throw ImageError("png decoding failed: " + path.string());
  png_set_read_fn(r.png, &cursor, read_bytes);
  png_read_info(r.png, r.info);
  if (png_get_bit_depth(r.png, r.info) != 16 || png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY) {
    png_error(r.png, "expected 16-bit grayscale");
  }
  if (std::endian::native == std::endian::little) png_set_swap(r.png);
  width = static_cast<int>(png_get_image_width(r.png, r.info));
  height = static_cast<int>(png_get_image_height(r.png, r.info));
  values.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] = reinterpret_cast<png_bytep>(values.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width));
  }
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return values;
}

namespace {
constexpr char kDepthMagic[8] = {'C', 'Q', 'D', 'E', 'P', 'T', 'H', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void write_depth(const std::filesystem::path& path, const RenderBuffers& buffers) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out.write(kDepthMagic, sizeof kDepthMagic);
  put_u32(out, static_cast<std::uint32_t>(buffers.width));
  put_u32(out, static_cast<std::uint32_t>(buffers.height));
  for (double d : buffers.depth) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
}

std::vector<float> read_depth(const std::filesystem::path& path, int& width, int& height) {
  const auto bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kDepthMagic, sizeof kDepthMagic) != 0) {
    throw ImageError("not a depth dump: " + path.string());
  }
  width = static_cast<int>(get_u32(bytes.data() + 8));
  height = static_cast<int>(get_u32(bytes.data() + 12));
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() != 16 + 4 * n) throw ImageError("truncated depth dump: " + path.string());
  std::vector<float> depth(n);
  for (std::size_t i = 0; i < n; ++i) depth[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
  return depth;
}

void export_render(const RenderBuffers& buffers, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  write_png_rgb(dir / (stem + ".png"), buffers.width, buffers.height, buffers.color);
  write_face_id_png(dir / (stem + "_faceid.png"), buffers);
  write_depth(dir / (stem + ".depth"), buffers);
}

}  // namespace cadq
