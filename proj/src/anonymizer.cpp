#include "fakeidet/anonymizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fakeidet/errors.hpp"
#include "fakeidet/hashing.hpp"
#include "fakeidet/rng.hpp"

namespace fakeidet {

namespace {

constexpr const char* kModule = "anonymizer";

std::string describe(const FieldAnnotation& f) {
  return std::string(to_string(f.kind)) + " box (" + std::to_string(f.box.x) + "," +
         std::to_string(f.box.y) + "," + std::to_string(f.box.w) + "," + std::to_string(f.box.h) + ")";
}

// Per-image pixel mask; set pixels are painted black. Boxes may overlap, in
// which case black wins.
class Mask {
 public:
  Mask(int w, int h) : w_(w), bits_(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  void fill(const Box& b) {
    if (b.w <= 0 || b.h <= 0) return;
    for (int y = b.y; y < b.y + b.h; ++y) {
      const auto row = static_cast<std::ptrdiff_t>(y) * w_;
      std::fill_n(bits_.begin() + row + b.x, b.w, std::uint8_t{1});
    }
  }

  bool test(std::size_t pixel) const { return bits_[pixel] != 0; }

 private:
  int w_;
  std::vector<std::uint8_t> bits_;
};

// Masked rectangles for a text box that keeps a few separated vertical
// slices visible, at most kPseudoTextVisibleBudget of its width in total.
// A slice is about half the box height wide, roughly one glyph.
std::vector<Box> sliced_text_mask(const Box& b, Rng& rng) {
  const int budget = static_cast<int>(std::floor(kPseudoTextVisibleBudget * b.w));
  const int slice = std::min(std::max(b.h / 2, 1), budget);
  const int slots = slice > 0 ? b.w / (slice + 1) : 0;
  const int count = slice > 0 ? std::min(budget / slice, slots) : 0;
  if (count == 0) return {b};

  // Slot k covers columns [k*(slice+1), k*(slice+1)+slice); the column after
  // each slot stays black so chosen slices never touch.
  std::vector<int> order(static_cast<std::size_t>(slots));
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(slots - i)));
    std::swap(order[i], order[j]);
  }
  std::vector<int> chosen(order.begin(), order.begin() + count);
  std::sort(chosen.begin(), chosen.end());

  std::vector<Box> masked;
  int col = 0;
  for (int s : chosen) {
    const int start = s * (slice + 1);
    if (start > col) masked.push_back({b.x + col, b.y, start - col, b.h});
    col = start + slice;
  }
  if (col < b.w) masked.push_back({b.x + col, b.y, b.w - col, b.h});
  return masked;
}

// Masked rectangles for a non-name sensitive box: one contiguous strip along
// the longer axis stays visible, covering at most 1 - kPseudoBoxMaskedMin of
// the area.
std::vector<Box> strip_mask(const Box& b, Rng& rng) {
  const double visible_fraction = 1.0 - kPseudoBoxMaskedMin;
  if (b.w >= b.h) {
    const int vw = static_cast<int>(std::floor(visible_fraction * b.w + 1e-9));
    if (vw <= 0) return {b};
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(b.w - vw + 1)));
    return {{b.x, b.y, x0, b.h}, {b.x + x0 + vw, b.y, b.w - x0 - vw, b.h}};
  }
  const int vh = static_cast<int>(std::floor(visible_fraction * b.h + 1e-9));
  if (vh <= 0) return {b};
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(b.h - vh + 1)));
  return {{b.x, b.y, b.w, y0}, {b.x, b.y + y0 + vh, b.w, b.h - y0 - vh}};
}

Rng box_rng(std::uint64_t seed, const std::string& image_id, std::size_t index, std::string_view rule) {
  return Rng(keyed_hash64(seed, {"anonymize.box", image_id, std::to_string(index), rule}));
}

int json_int(const nlohmann::json& j, const char* key, const std::filesystem::path& path) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw Error(ErrorKind::format, kModule, path.string() + ": missing integer field '" + key + "'");
  return j.at(key).get<int>();
}

std::string json_string(const nlohmann::json& j, const char* key, const std::filesystem::path& path) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw Error(ErrorKind::format, kModule, path.string() + ": missing string field '" + key + "'");
  return j.at(key).get<std::string>();
}

}  // namespace

void validate_annotations(const IdImageInfo& info, int width, int height) {
  if (width <= 0 || height <= 0)
    throw Error(ErrorKind::annotation, kModule, info.image_id + ": image has no pixels");
  int faces = 0;
  for (const auto& f : info.fields) {
    const auto& b = f.box;
    if (b.w <= 0 || b.h <= 0)
      throw Error(ErrorKind::annotation, kModule, info.image_id + ": empty " + describe(f));
    if (b.x < 0 || b.y < 0 || b.x + b.w > width || b.y + b.h > height)
      throw Error(ErrorKind::annotation, kModule,
                  info.image_id + ": " + describe(f) + " exceeds image bounds " + std::to_string(width) +
                      "x" + std::to_string(height));
    if (f.kind == FieldKind::face && ++faces > 1)
      throw Error(ErrorKind::annotation, kModule, info.image_id + ": more than one face box");
  }
}

RgbImage apply_anonymization(const AnnotatedIDImage& img, AnonymizationLevel level, std::uint64_t seed) {
  const auto& px = img.pixels;
  validate_annotations(img.info, px.width(), px.height());
  if (level == AnonymizationLevel::non_anonymized) return px;

  const auto& fields = img.info.fields;
  Mask mask(px.width(), px.height());

  if (level == AnonymizationLevel::fully_anonymized) {
    for (const auto& f : fields) mask.fill(f.box);
  } else {
    const bool has_name = std::any_of(fields.begin(), fields.end(),
                                      [](const auto& f) { return f.kind == FieldKind::name; });
    const bool has_surname = std::any_of(fields.begin(), fields.end(),
                                         [](const auto& f) { return f.kind == FieldKind::surname; });
    if (!has_name && !has_surname)
      throw Error(ErrorKind::policy, kModule,
                  img.info.image_id + ": pseudo anonymization needs name or surname boxes; missing: name, surname");

    // One of the two is always blacked out completely. When only one is
    // annotated it is the one hidden.
    FieldKind hidden;
    if (has_name && has_surname) {
      const auto coin = keyed_hash64(seed, {"anonymize.name_coin", img.info.image_id}) & 1u;
      hidden = coin == 0 ? FieldKind::name : FieldKind::surname;
    } else {
      hidden = has_name ? FieldKind::name : FieldKind::surname;
    }

    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto& f = fields[i];
      if (f.kind == hidden) {
        mask.fill(f.box);
      } else if (f.kind == FieldKind::name || f.kind == FieldKind::surname) {
        auto rng = box_rng(seed, img.info.image_id, i, "slices");
        for (const auto& r : sliced_text_mask(f.box, rng)) mask.fill(r);
      } else {
        auto rng = box_rng(seed, img.info.image_id, i, "strip");
        for (const auto& r : strip_mask(f.box, rng)) mask.fill(r);
      }
    }
  }

  RgbImage out = px;
  auto bytes = out.bytes();
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    if (mask.test(p)) {
      bytes[3 * p] = 0;
      bytes[3 * p + 1] = 0;
      bytes[3 * p + 2] = 0;
    }
  }
  return out;
}

AnnotationDocument read_annotation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, kModule, "cannot open annotation " + path.string());
  AnnotationDocument doc;
  try {
    doc.raw = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, kModule, path.string() + ": " + e.what());
  }
  const auto& j = doc.raw;
  if (!j.is_object()) throw Error(ErrorKind::format, kModule, path.string() + ": not a JSON object");
  const std::string image = json_string(j, "image", path);
  doc.image_path = image;
  if (doc.image_path.is_relative()) doc.image_path = path.parent_path() / doc.image_path;
  doc.width = json_int(j, "width", path);
  doc.height = json_int(j, "height", path);
  doc.info.image_id = j.contains("id") ? json_string(j, "id", path)
                                       : std::filesystem::path(image).stem().string();
  doc.info.subject_id = json_string(j, "subject", path);
  doc.info.template_version = json_int(j, "template_version", path);
  doc.info.pai = parse_pai(json_string(j, "pai", path));
  if (!j.contains("fields") || !j.at("fields").is_array())
    throw Error(ErrorKind::format, kModule, path.string() + ": missing array field 'fields'");
  for (const auto& f : j.at("fields")) {
    FieldAnnotation a;
    a.kind = parse_field_kind(json_string(f, "type", path));
    a.box = {json_int(f, "x", path), json_int(f, "y", path), json_int(f, "w", path), json_int(f, "h", path)};
    doc.info.fields.push_back(a);
  }
  validate_annotations(doc.info, doc.width, doc.height);
  return doc;
}

AnnotatedIDImage load_annotated_image(const AnnotationDocument& doc,
                                      const std::filesystem::path& image_override) {
  AnnotatedIDImage img;
  img.info = doc.info;
  img.pixels = read_image(image_override.empty() ? doc.image_path : image_override);
  if (img.pixels.width() != doc.width || img.pixels.height() != doc.height)
    throw Error(ErrorKind::annotation, kModule,
                doc.info.image_id + ": image is " + std::to_string(img.pixels.width()) + "x" +
                    std::to_string(img.pixels.height()) + " but annotation declares " +
                    std::to_string(doc.width) + "x" + std::to_string(doc.height));
  return img;
}

}  // namespace fakeidet
