#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "fakeidet/image.hpp"
#include "fakeidet/patch.hpp"
#include "support/synthetic.hpp"

namespace fixture {

namespace fs = std::filesystem;

// Fresh empty directory under the system temp dir.
inline fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fakeidet_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// `n` clean 64x64 patches written to `patch_dir`, spread over a handful of
// IDs with both labels and both release levels.
inline std::vector<fakeidet::PatchRecord> patch_source(const fs::path& patch_dir, int n, std::uint64_t seed) {
  using namespace fakeidet;
  std::vector<PatchRecord> out;
  for (int i = 0; i < n; ++i) {
    const int id = i % 10;
    const PaiClass pai = id % 3 == 0 ? PaiClass::bonafide : (id % 3 == 1 ? PaiClass::print : PaiClass::screen);
    PatchRecord r;
    r.patch_id = "patch" + std::to_string(i);
    r.source_code = "src_" + std::to_string(id);
    r.pai = pai;
    r.label = label_for(pai);
    r.anon_level = i % 2 ? AnonymizationLevel::fully_anonymized : AnonymizationLevel::pseudo_anonymized;
    r.patch_size = 64;
    r.grid = GridOrigin{64 * (i / 10), 0};
    r.split = id < 8 ? Split::dev : Split::eval;
    write_png(synth::noise_image(64, 64, seed * 100003 + static_cast<std::uint64_t>(i)), patch_dir / (r.patch_id + ".png"));
    out.push_back(r);
  }
  return out;
}

// PNG carrying a tEXt chunk, written with the full libpng API.
inline void write_png_with_text(const fakeidet::RgbImage& img, const fs::path& path, const char* key,
                                const char* value) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png write failed");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_text text{};
  text.compression = PNG_TEXT_COMPRESSION_NONE;
  text.key = const_cast<char*>(key);
  text.text = const_cast<char*>(value);
  png_set_text(png, info, &text, 1);
  png_write_info(png, info);
  const auto bytes = img.bytes();
  for (int y = 0; y < img.height(); ++y)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * img.width() * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace fixture
