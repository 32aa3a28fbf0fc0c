#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fakeidet/anonymizer.hpp"
#include "fakeidet/image.hpp"
#include "fakeidet/kernels.hpp"
#include "fakeidet/types.hpp"

namespace fakeidet {

using kernels::GridOrigin;

struct PatchConfig {
  int patch_size = 64;
  double retention_p = 0.8;
  double black_discard_threshold = 0.9;
  int resize_target = 224;

  void validate() const;
};

struct PatchRecord {
  std::string patch_id;
  std::string source_code;
  Label label = Label::real;
  PaiClass pai = PaiClass::bonafide;
  AnonymizationLevel anon_level = AnonymizationLevel::non_anonymized;
  int patch_size = 0;
  std::optional<GridOrigin> grid;  // internal manifests only
  Split split = Split::dev;

  friend bool operator==(const PatchRecord&, const PatchRecord&) = default;
};

struct Patch {
  PatchRecord record;
  RgbImage pixels;
};

struct ExtractionResult {
  std::vector<Patch> patches;
  std::size_t grid_count = 0;
  std::size_t discarded_black = 0;
  std::size_t dropped_retention = 0;
  // Set when nothing survived; not an error (tiny or fully masked images).
  bool empty_warning = false;
};

// Non-overlapping size×size origins, x varying fastest; right and bottom
// remainders are dropped.
std::vector<GridOrigin> extract_grid(int width, int height, int size);

double black_fraction(const RgbImage& tile);

// Keep decision for one patch; keyed by (seed, image_id, origin) so the
// outcome is independent of processing order.
bool retained(std::uint64_t seed, std::string_view image_id, GridOrigin origin, double p);

std::vector<GridOrigin> retain(std::span<const GridOrigin> origins, std::string_view image_id, double p,
                               std::uint64_t seed);

// Bilinear resize with pixel-centre alignment and edge clamping.
RgbImage resize_patch(const RgbImage& tile, int target);

struct ExtractionContext {
  std::string source_code;
  AnonymizationLevel level = AnonymizationLevel::non_anonymized;
  Split split = Split::dev;
};

// grid -> black filter -> retention, on an image that is already masked.
ExtractionResult extract_patches(const AnnotatedIDImage& masked, const PatchConfig& cfg, std::uint64_t seed,
                                 const ExtractionContext& ctx);

// JSON lines. Positions are written only when the record carries them and
// include_position is set.
std::string manifest_line(const PatchRecord& r, bool include_position);
void write_manifest(std::ostream& out, std::span<const PatchRecord> records, bool include_position);
void append_manifest(const std::filesystem::path& path, std::span<const PatchRecord> records);
PatchRecord parse_manifest_line(std::string_view line);
std::vector<PatchRecord> read_manifest(const std::filesystem::path& path);

}  // namespace fakeidet
