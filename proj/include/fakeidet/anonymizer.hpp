#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fakeidet/image.hpp"
#include "fakeidet/types.hpp"

namespace fakeidet {

struct Box {
  int x = 0, y = 0, w = 0, h = 0;
  bool contains(int px, int py) const noexcept {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  friend bool operator==(const Box&, const Box&) = default;
};

struct FieldAnnotation {
  FieldKind kind = FieldKind::other_sensitive;
  Box box;
};

struct IdImageInfo {
  std::string image_id;
  std::string subject_id;
  int template_version = 0;
  PaiClass pai = PaiClass::bonafide;
  std::vector<FieldAnnotation> fields;
};

struct AnnotatedIDImage {
  IdImageInfo info;
  RgbImage pixels;

  Label label() const { return label_for(info.pai); }
};

// Fraction of a text field's width that may stay visible at pseudo level.
inline constexpr double kPseudoTextVisibleBudget = 0.30;
// Minimum masked fraction of every other sensitive box at pseudo level.
inline constexpr double kPseudoBoxMaskedMin = 0.70;

// Throws Error{annotation} if a box is empty, leaves the image or a second
// face box is present.
void validate_annotations(const IdImageInfo& info, int width, int height);

RgbImage apply_anonymization(const AnnotatedIDImage& img, AnonymizationLevel level, std::uint64_t seed);

// Annotation document:
// {"image", "width", "height", "subject", "template_version", "pai", "fields": [...]}
// with an optional "id"; the image stem is the id otherwise.
struct AnnotationDocument {
  IdImageInfo info;
  std::filesystem::path image_path;
  int width = 0;
  int height = 0;
  nlohmann::json raw;
};

AnnotationDocument read_annotation(const std::filesystem::path& path);

// Loads the referenced image (relative paths resolve against the annotation
// file) and checks it against the declared size.
AnnotatedIDImage load_annotated_image(const AnnotationDocument& doc,
                                      const std::filesystem::path& image_override = {});

}  // namespace fakeidet
