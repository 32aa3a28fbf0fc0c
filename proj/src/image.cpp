#include "fakeidet/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "fakeidet/errors.hpp"

namespace fakeidet {

namespace {

constexpr const char* kModule = "image";

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorKind::io, kModule, "cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

RgbImage read_png(const std::filesystem::path& path) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.c_str())) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw Error(ErrorKind::io, kModule, "corrupt PNG " + path.string() + ": " + msg);
  }
  desc.format = PNG_FORMAT_RGB;
  RgbImage img(static_cast<int>(desc.width), static_cast<int>(desc.height));
  if (!png_image_finish_read(&desc, nullptr, img.bytes().data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw Error(ErrorKind::io, kModule, "corrupt PNG " + path.string() + ": " + msg);
  }
  return img;
}

struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo) {
  auto* e = reinterpret_cast<JpegErr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, e->message);
  std::longjmp(e->jump, 1);
}

RgbImage read_jpeg(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  jpeg_decompress_struct cinfo{};
  JpegErr err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_fail;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::io, kModule, "corrupt JPEG " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  // Re-arm after the allocation so the image object is never modified
  // between setjmp and a longjmp.
  RgbImage img(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  std::uint8_t* const base = img.bytes().data();
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::io, kModule, "corrupt JPEG " + path.string() + ": " + err.message);
  }
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = base + static_cast<std::size_t>(cinfo.output_scanline) * cinfo.output_width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

RgbImage::RgbImage(int width, int height, Rgb fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorKind::config, kModule, "negative image size");
  data_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

RgbImage RgbImage::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > width_ || y + h > height_)
    throw Error(ErrorKind::config, kModule, "crop region outside image");
  RgbImage out(w, h);
  const auto row_bytes = static_cast<std::size_t>(w) * 3;
  for (int r = 0; r < h; ++r) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(offset(x, y + r)), row_bytes,
                out.data_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r) * row_bytes));
  }
  return out;
}

RgbImage read_image(const std::filesystem::path& path) {
  unsigned char sig[8] = {};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, kModule, "cannot open " + path.string());
    in.read(reinterpret_cast<char*>(sig), sizeof sig);
  }
  if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (sig[0] == 0xFF && sig[1] == 0xD8) return read_jpeg(path);
  throw Error(ErrorKind::io, kModule, "unsupported image format: " + path.string());
}

void write_png(const RgbImage& img, const std::filesystem::path& path) {
  if (img.empty()) throw Error(ErrorKind::config, kModule, "refusing to write empty image");
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width());
  desc.height = static_cast<png_uint_32>(img.height());
  desc.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&desc, path.c_str(), 0, img.bytes().data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw Error(ErrorKind::io, kModule, "PNG write failed for " + path.string() + ": " + msg);
  }
}

std::vector<std::string> png_text_keys(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  png_infop end = png_create_info_struct(png);
  std::vector<std::string> keys;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, &end);
    throw Error(ErrorKind::io, kModule, "corrupt PNG " + path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_read_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_textp text = nullptr;
  int n = 0;
  png_get_text(png, info, &text, &n);
  for (int i = 0; i < n; ++i) keys.emplace_back(text[i].key);
  png_destroy_read_struct(&png, &info, &end);
  return keys;
}

}  // namespace fakeidet
