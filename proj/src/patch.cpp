#include "fakeidet/patch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "fakeidet/errors.hpp"
#include "fakeidet/hashing.hpp"

namespace fakeidet {

namespace {

constexpr const char* kModule = "patch-extractor";

std::string patch_id_for(std::string_view image_id, AnonymizationLevel level, int size, GridOrigin o) {
  const auto h = keyed_hash64(std::uint64_t{0}, {"patch", image_id, to_string(level), std::to_string(size),
                                                 std::to_string(o.x), std::to_string(o.y)});
  return hex64(h);
}

}  // namespace

void PatchConfig::validate() const {
  if (patch_size <= 0) throw Error(ErrorKind::config, kModule, "patch size must be positive");
  if (!(retention_p >= 0.0 && retention_p <= 1.0))
    throw Error(ErrorKind::config, kModule, "retention probability must lie in [0,1]");
  if (!(black_discard_threshold >= 0.0 && black_discard_threshold <= 1.0))
    throw Error(ErrorKind::config, kModule, "black discard threshold must lie in [0,1]");
  if (resize_target <= 0) throw Error(ErrorKind::config, kModule, "resize target must be positive");
}

std::vector<GridOrigin> extract_grid(int width, int height, int size) {
  if (size <= 0) throw Error(ErrorKind::config, kModule, "patch size must be positive, got " + std::to_string(size));
  if (width < 0 || height < 0) throw Error(ErrorKind::config, kModule, "negative image size");
  const int cols = width / size;
  const int rows = height / size;
  std::vector<GridOrigin> out;
  out.reserve(static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows));
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) out.push_back({i * size, j * size});
  return out;
}

double black_fraction(const RgbImage& tile) {
  if (tile.empty()) throw Error(ErrorKind::config, kModule, "black fraction of an empty tile");
  const auto bytes = tile.bytes();
  std::size_t black = 0;
  for (std::size_t i = 0; i < bytes.size(); i += 3) black += (bytes[i] | bytes[i + 1] | bytes[i + 2]) == 0;
  return static_cast<double>(black) / static_cast<double>(tile.pixel_count());
}

bool retained(std::uint64_t seed, std::string_view image_id, GridOrigin origin, double p) {
  const auto h = keyed_hash64(seed, {"retain", image_id, std::to_string(origin.x), std::to_string(origin.y)});
  return unit_from_hash(h) < p;
}

std::vector<GridOrigin> retain(std::span<const GridOrigin> origins, std::string_view image_id, double p,
                               std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::config, kModule, "retention probability must lie in [0,1]");
  std::vector<GridOrigin> kept;
  for (const auto& o : origins)
    if (retained(seed, image_id, o, p)) kept.push_back(o);
  return kept;
}

RgbImage resize_patch(const RgbImage& tile, int target) {
  if (tile.empty()) throw Error(ErrorKind::config, kModule, "cannot resize an empty tile");
  if (target <= 0) throw Error(ErrorKind::config, kModule, "resize target must be positive");
  if (tile.width() == target && tile.height() == target) return tile;

  const double sx = static_cast<double>(tile.width()) / target;
  const double sy = static_cast<double>(tile.height()) / target;
  const auto src = tile.bytes();
  const auto stride = static_cast<std::size_t>(tile.width()) * 3;
  RgbImage out(target, target);
  auto dst = out.bytes();

  for (int dy = 0; dy < target; ++dy) {
    const double fy_src = std::clamp((dy + 0.5) * sy - 0.5, 0.0, static_cast<double>(tile.height() - 1));
    const int y0 = static_cast<int>(fy_src);
    const int y1 = std::min(y0 + 1, tile.height() - 1);
    const double wy = fy_src - y0;
    for (int dx = 0; dx < target; ++dx) {
      const double fx_src = std::clamp((dx + 0.5) * sx - 0.5, 0.0, static_cast<double>(tile.width() - 1));
      const int x0 = static_cast<int>(fx_src);
      const int x1 = std::min(x0 + 1, tile.width() - 1);
      const double wx = fx_src - x0;
      for (int c = 0; c < 3; ++c) {
        auto px = [&](int x, int y) {
          return static_cast<double>(src[static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x) * 3 + c]);
        };
        const double top = (1.0 - wx) * px(x0, y0) + wx * px(x1, y0);
        const double bottom = (1.0 - wx) * px(x0, y1) + wx * px(x1, y1);
        const double v = (1.0 - wy) * top + wy * bottom;
        dst[(static_cast<std::size_t>(dy) * target + dx) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

ExtractionResult extract_patches(const AnnotatedIDImage& masked, const PatchConfig& cfg, std::uint64_t seed,
                                 const ExtractionContext& ctx) {
  cfg.validate();
  const auto& img = masked.pixels;
  const auto& image_id = masked.info.image_id;
  ExtractionResult result;

  const auto grid = extract_grid(img.width(), img.height(), cfg.patch_size);
  result.grid_count = grid.size();

  const auto fractions = kernels::parallel::black_fractions(img, grid, cfg.patch_size);
  std::vector<GridOrigin> clean;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (fractions[i] <= cfg.black_discard_threshold) clean.push_back(grid[i]);
  }
  result.discarded_black = grid.size() - clean.size();

  const auto kept = retain(clean, image_id, cfg.retention_p, derive_seed(seed, "retain"));
  result.dropped_retention = clean.size() - kept.size();

  for (const auto& o : kept) {
    Patch p;
    p.record.patch_id = patch_id_for(image_id, ctx.level, cfg.patch_size, o);
    p.record.source_code = ctx.source_code;
    p.record.label = masked.label();
    p.record.pai = masked.info.pai;
    p.record.anon_level = ctx.level;
    p.record.patch_size = cfg.patch_size;
    p.record.grid = o;
    p.record.split = ctx.split;
    p.pixels = img.crop(o.x, o.y, cfg.patch_size, cfg.patch_size);
    result.patches.push_back(std::move(p));
  }
  result.empty_warning = result.patches.empty();
  return result;
}

std::string manifest_line(const PatchRecord& r, bool include_position) {
  nlohmann::ordered_json j;
  j["patch_id"] = r.patch_id;
  j["source_code"] = r.source_code;
  j["label"] = to_string(r.label);
  j["pai"] = to_string(r.pai);
  j["anon_level"] = to_string(r.anon_level);
  j["patch_size"] = r.patch_size;
  if (include_position && r.grid) {
    j["x"] = r.grid->x;
    j["y"] = r.grid->y;
  }
  j["split"] = to_string(r.split);
  return j.dump();
}

void write_manifest(std::ostream& out, std::span<const PatchRecord> records, bool include_position) {
  for (const auto& r : records) out << manifest_line(r, include_position) << '\n';
}

void append_manifest(const std::filesystem::path& path, std::span<const PatchRecord> records) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorKind::io, kModule, "cannot open manifest " + path.string());
  write_manifest(out, records, true);
  if (!out) throw Error(ErrorKind::io, kModule, "write failed for " + path.string());
}

PatchRecord parse_manifest_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, kModule, std::string("bad manifest line: ") + e.what());
  }
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string())
      throw Error(ErrorKind::format, kModule, std::string("manifest record lacks string '") + key + "'");
    return j.at(key).get<std::string>();
  };
  auto integer = [&](const char* key) {
    if (!j.at(key).is_number_integer())
      throw Error(ErrorKind::format, kModule, std::string("manifest field '") + key + "' is not an integer");
    return j.at(key).get<int>();
  };
  PatchRecord r;
  r.patch_id = str("patch_id");
  r.source_code = str("source_code");
  r.label = parse_label(str("label"));
  r.pai = parse_pai(str("pai"));
  r.anon_level = parse_level(str("anon_level"));
  if (!j.contains("patch_size")) throw Error(ErrorKind::format, kModule, "manifest record lacks 'patch_size'");
  r.patch_size = integer("patch_size");
  r.split = parse_split(str("split"));
  if (j.contains("x") != j.contains("y"))
    throw Error(ErrorKind::format, kModule, r.patch_id + ": manifest record has only one of x/y");
  if (j.contains("x")) r.grid = GridOrigin{integer("x"), integer("y")};

  if (r.label != label_for(r.pai))
    throw Error(ErrorKind::integrity, kModule, r.patch_id + ": label " + std::string(to_string(r.label)) +
                                                   " contradicts PAI " + std::string(to_string(r.pai)));
  if (r.patch_size <= 0) throw Error(ErrorKind::format, kModule, r.patch_id + ": non-positive patch_size");
  if (r.grid && (r.grid->x % r.patch_size != 0 || r.grid->y % r.patch_size != 0))
    throw Error(ErrorKind::integrity, kModule, r.patch_id + ": grid origin not a multiple of the patch size");
  return r;
}

std::vector<PatchRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kModule, "cannot open manifest " + path.string());
  std::vector<PatchRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(parse_manifest_line(line));
    } catch (const Error& e) {
      throw Error(e.kind(), kModule, path.string() + ":" + std::to_string(n) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace fakeidet
