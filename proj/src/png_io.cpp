#include <png.h>

#include <csetjmp>
#include <cstring>
#include <string>
#include <fstream>
#include <iterator>

#include "traylab/errors.hpp"
#include "traylab/render.hpp"

namespace traylab {
namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_nothing(png_structp) {}

thread_local std::string last_png_error;

[[noreturn]] void record_error(png_structp png, png_const_charp message) {
  last_png_error = message;
  png_longjmp(png, 1);
}

void ignore_warning(png_structp, png_const_charp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) png_error(png, "truncated data");
  std::memcpy(data, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

}  // namespace

// libpng unwinds with longjmp. Only libpng frames and the trivial I/O
// callbacks lie between setjmp and the jump, so no destructors are skipped.
std::vector<std::uint8_t> encode_png(const Raster& raster) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, record_error, ignore_warning);
  if (png == nullptr) throw Error("png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};
  if (info == nullptr) throw Error("png: cannot allocate info");

  if (setjmp(png_jmpbuf(png)) != 0) throw Error("png: " + last_png_error);
  png_set_write_fn(png, &out, append_bytes, flush_nothing);
  png_set_compression_level(png, 9);
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(raster.width) * 3;
  for (int row = 0; row < raster.height; ++row) {
    png_write_row(png, const_cast<png_bytep>(raster.pixels.data() + stride * static_cast<std::size_t>(row)));
  }
  png_write_end(png, nullptr);
  return out;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error("png: not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, record_error, ignore_warning);
  if (png == nullptr) throw Error("png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};
  if (info == nullptr) throw Error("png: cannot allocate info");

  ReadCursor cursor{bytes, 0};
  Raster raster;
  if (setjmp(png_jmpbuf(png)) != 0) throw Error("png: " + last_png_error);
  png_set_read_fn(png, &cursor, read_bytes);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  raster.width = static_cast<int>(png_get_image_width(png, info));
  raster.height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t stride = static_cast<std::size_t>(raster.width) * 3;
  if (png_get_rowbytes(png, info) != stride) png_error(png, "unsupported pixel layout");
  raster.pixels.resize(stride * static_cast<std::size_t>(raster.height));
  for (int row = 0; row < raster.height; ++row) {
    png_read_row(png, raster.pixels.data() + stride * static_cast<std::size_t>(row), nullptr);
  }
  png_read_end(png, nullptr);
  return raster;
}

void write_png(const Raster& raster, const std::filesystem::path& path) {
  const auto bytes = encode_png(raster);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

Raster read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(path.string(), e.what());
  }
}

}  // namespace traylab
