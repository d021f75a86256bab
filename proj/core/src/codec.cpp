// PNG and JPEG codecs over libpng and libjpeg.

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

#include <jpeglib.h>
#include <png.h>

#include <fmt/format.h>

#include "wmadv/error.hpp"
#include "wmadv/imaging.hpp"

namespace wmadv {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> b) {
  return b.size() >= 8 && std::memcmp(b.data(), kPngSignature, 8) == 0;
}
bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

ImageTensor from_interleaved(const std::uint8_t* px, int width, int height, int stride_channels) {
  ImageTensor img(width, height);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = px + static_cast<std::size_t>(y) * width * stride_channels;
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) img[c](y, x) = row[x * stride_channels + c];
    }
  }
  return img;
}

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_fail(png_structp png, png_const_charp message) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = message;
  png_longjmp(png, 1);
}

void png_ignore_warning(png_structp, png_const_charp) {}

// C-style on purpose: nothing with a destructor may live across setjmp.
bool write_png_rgb(const std::uint8_t* px, int w, int h, std::vector<std::uint8_t>& out, std::string& message) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_ignore_warning);
  if (png == nullptr) {
    message = "out of memory";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &out, png_append, nullptr);
  // Speed over size: candidates are written once and read once.
  png_set_compression_level(png, 1);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(px + static_cast<std::size_t>(y) * w * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

ImageTensor decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError(fmt::format("PNG header: {}", msg));
  }
  // RGBA then drop alpha: reading straight to RGB would composite onto black.
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, px.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError(fmt::format("PNG image data ({} bytes supplied): {}", bytes.size(), msg));
  }
  return from_interleaved(px.data(), static_cast<int>(image.width), static_cast<int>(image.height), 4);
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silence(j_common_ptr, int) {}

// Plain C-style body so longjmp never skips a C++ destructor. Returns false
// and fills `message`/`offset` on failure.
bool decode_jpeg_raw(std::span<const std::uint8_t> bytes, std::vector<std::uint8_t>& px, int& width,
                     int& height, std::string& message, std::size_t& offset) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  err.pub.emit_message = jpeg_silence;
  err.message[0] = '\0';

  if (setjmp(err.jump)) {
    offset = bytes.size() - (cinfo.src ? cinfo.src->bytes_in_buffer : bytes.size());
    message = err.message;
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  px.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = px.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

ImageTensor decode_jpeg(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> px;
  int width = 0;
  int height = 0;
  std::string message;
  std::size_t offset = 0;
  if (!decode_jpeg_raw(bytes, px, width, height, message, offset)) {
    throw DecodeError(fmt::format("JPEG at byte offset {}: {}", offset, message));
  }
  return from_interleaved(px.data(), width, height, 3);
}

}  // namespace

ImageTensor decode(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  if (bytes.empty()) throw DecodeError("empty input at byte offset 0");
  throw DecodeError(fmt::format("unrecognized image signature at byte offset 0 ({} bytes)", bytes.size()));
}

std::vector<std::uint8_t> encode_png(const ImageTensor& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 1 || h < 1) throw DimensionError("cannot encode an empty image");
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        px[(static_cast<std::size_t>(y) * w + x) * 3 + c] = quantize_sample(img[c](y, x));
      }
    }
  }

  std::vector<std::uint8_t> out;
  std::string message;
  if (!write_png_rgb(px.data(), w, h, out, message)) throw Error(fmt::format("PNG encode failed: {}", message));
  return out;
}

}  // namespace wmadv
