#include "ufse/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

namespace ufse {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Tensor<float> from_interleaved(const std::vector<std::uint8_t>& rgb, int width, int height) {
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  std::vector<float> values(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) values[c * plane + p] = static_cast<float>(rgb[p * 3 + c]) / 255.0f;
  }
  return Tensor<float>(Shape{3, height, width}, std::move(values));
}

Tensor<float> read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot decode PNG " + path + ": " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw IoError("unsupported image format in " + path + ": 16-bit PNG (only 8-bit is accepted)");
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path + ": " + image.message);
  }
  return from_interleaved(buffer, static_cast<int>(image.width), static_cast<int>(image.height));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Tensor<float> read_jpeg(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path);
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> rgb;
  int width = 0, height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("cannot decode JPEG " + path + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_interleaved(rgb, width, height);
}

void write_jpeg(const std::string& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path + " for writing");
  jpeg_compress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw IoError("cannot encode JPEG " + path + ": " + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, file.get());
  cinfo.image_width = static_cast<JDIMENSION>(width);
  cinfo.image_height = static_cast<JDIMENSION>(height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 95, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<std::uint8_t*>(rgb.data()) + static_cast<std::size_t>(cinfo.next_scanline) * width * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

void write_png(const std::string& path, int width, int height, std::uint32_t format, const void* pixels) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels, 0, nullptr)) {
    throw IoError("cannot write PNG " + path + ": " + image.message);
  }
}

bool has_jpeg_extension(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return false;
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == "jpg" || ext == "jpeg";
}

}  // namespace

Tensor<float> image_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), sizeof(sig));
  const auto got = in.gcount();
  in.close();
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (got == 8 && std::memcmp(sig, png_sig, 8) == 0) return read_png(path);
  if (got >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return read_jpeg(path);
  throw IoError("unsupported image format in " + path + " (expected PNG or JPEG)");
}

void image_write(const std::string& path, const Tensor<float>& image) {
  const auto& d = image.dims();
  std::int64_t h, w;
  if (d.size() == 3 && d[0] == 3) {
    h = d[1], w = d[2];
  } else if (d.size() == 4 && d[0] == 1 && d[1] == 3) {
    h = d[2], w = d[3];
  } else {
    throw UsageError("image_write expects a 3×H×W tensor, got " + shape_string(d));
  }
  const std::size_t plane = static_cast<std::size_t>(h * w);
  auto values = image.data();
  std::vector<std::uint8_t> rgb(plane * 3);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(values[c * plane + p], 0.0f, 1.0f);
      rgb[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  if (has_jpeg_extension(path)) {
    write_jpeg(path, static_cast<int>(w), static_cast<int>(h), rgb);
  } else {
    write_png_rgb(path, static_cast<int>(w), static_cast<int>(h), rgb);
  }
}

void write_png_gray(const std::string& path, int width, int height, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) throw UsageError("gray PNG pixel count mismatch");
  write_png(path, width, height, PNG_FORMAT_GRAY, pixels.data());
}

void write_png_rgb(const std::string& path, int width, int height, std::span<const std::uint8_t> interleaved) {
  if (interleaved.size() != static_cast<std::size_t>(width) * height * 3) {
    throw UsageError("RGB PNG pixel count mismatch");
  }
  write_png(path, width, height, PNG_FORMAT_RGB, interleaved.data());
}

Tensor<float> image_grid(const std::vector<Tensor<float>>& images, int columns) {
  if (images.empty() || columns < 1) throw UsageError("image_grid needs at least one image and column");
  const auto& d0 = images.front().dims();
  const std::int64_t h = d0[d0.size() - 2], w = d0[d0.size() - 1];
  const std::int64_t cols = std::min<std::int64_t>(columns, static_cast<std::int64_t>(images.size()));
  const std::int64_t rows = (static_cast<std::int64_t>(images.size()) + cols - 1) / cols;
  const std::int64_t gh = rows * h, gw = cols * w;
  std::vector<float> grid(static_cast<std::size_t>(3 * gh * gw), 1.0f);
  for (std::size_t idx = 0; idx < images.size(); ++idx) {
    const auto& img = images[idx];
    if (img.numel() != 3 * h * w) throw UsageError("image_grid: images must share one size");
    const std::int64_t oy = static_cast<std::int64_t>(idx) / cols * h, ox = static_cast<std::int64_t>(idx) % cols * w;
    auto src = img.data();
    for (std::int64_t c = 0; c < 3; ++c) {
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          grid[(c * gh + oy + y) * gw + ox + x] = src[(c * h + y) * w + x];
        }
      }
    }
  }
  return Tensor<float>(Shape{3, gh, gw}, std::move(grid));
}

}  // namespace ufse
