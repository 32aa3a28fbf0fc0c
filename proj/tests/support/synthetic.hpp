#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fakeidet/anonymizer.hpp"
#include "fakeidet/embedding_io.hpp"
#include "fakeidet/image.hpp"
#include "fakeidet/patch.hpp"
#include "fakeidet/rng.hpp"

namespace synth {

// Random image with no exactly-black pixel.
inline fakeidet::RgbImage noise_image(int w, int h, std::uint64_t seed) {
  fakeidet::Rng rng(seed);
  fakeidet::RgbImage img(w, h);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(1 + rng.below(255));
  return img;
}

// 200x120 card with the usual sensitive fields.
inline fakeidet::AnnotatedIDImage id_card(std::uint64_t seed, const std::string& image_id = "card") {
  using fakeidet::FieldKind;
  fakeidet::AnnotatedIDImage img;
  img.pixels = noise_image(200, 120, seed);
  img.info.image_id = image_id;
  img.info.subject_id = "subject-" + image_id;
  img.info.template_version = 2;
  img.info.pai = fakeidet::PaiClass::bonafide;
  img.info.fields = {
      {FieldKind::face, {10, 20, 50, 70}},       {FieldKind::name, {70, 20, 80, 12}},
      {FieldKind::surname, {70, 36, 100, 12}},   {FieldKind::id_number, {70, 60, 60, 10}},
      {FieldKind::expiry, {140, 60, 40, 10}},    {FieldKind::support_number, {70, 80, 70, 10}},
      {FieldKind::signature, {150, 85, 40, 25}},
  };
  return img;
}

struct BoxStats {
  std::size_t black = 0;
  std::size_t area = 0;
  int visible_columns = 0;
  // Bounding box of non-black pixels, for contiguity checks.
  int vx0 = 1 << 30, vy0 = 1 << 30, vx1 = -1, vy1 = -1;
  double black_fraction() const { return static_cast<double>(black) / static_cast<double>(area); }
  std::size_t visible() const { return area - black; }
};

inline BoxStats box_stats(const fakeidet::RgbImage& img, const fakeidet::Box& b) {
  BoxStats s;
  s.area = static_cast<std::size_t>(b.w) * static_cast<std::size_t>(b.h);
  for (int x = b.x; x < b.x + b.w; ++x) {
    bool any = false;
    for (int y = b.y; y < b.y + b.h; ++y) {
      if (img.at(x, y) == fakeidet::kBlack) {
        ++s.black;
      } else {
        any = true;
        s.vx0 = std::min(s.vx0, x);
        s.vy0 = std::min(s.vy0, y);
        s.vx1 = std::max(s.vx1, x);
        s.vy1 = std::max(s.vy1, y);
      }
    }
    s.visible_columns += any;
  }
  return s;
}

struct EmbeddedSet {
  fakeidet::EmbeddingFile embeddings;
  std::vector<fakeidet::PatchRecord> manifest;
  std::vector<std::string> subjects;
};

// Gaussian embeddings for whole subjects: each subject owns one bona fide ID
// and one attack ID (print or screen, alternating), each with
// `patches_per_id` patches. Attack patches sit at +mu, bona fide at -mu.
inline EmbeddedSet gaussian_subjects(int n_subjects, int patches_per_id, std::size_t dim, double mu_norm,
                                     double noise, std::uint64_t seed, const std::string& prefix = "s") {
  using namespace fakeidet;
  Rng rng(seed);
  std::vector<double> mu(dim);
  double norm = 0.0;
  for (auto& m : mu) {
    m = rng.normal();
    norm += m * m;
  }
  for (auto& m : mu) m *= mu_norm / std::sqrt(norm);

  EmbeddedSet set;
  set.embeddings.backbone_id = "synthetic";
  set.embeddings.dim = dim;
  std::vector<float> v(dim);
  for (int s = 0; s < n_subjects; ++s) {
    const std::string subject = prefix + std::to_string(s);
    set.subjects.push_back(subject);
    for (PaiClass pai : {PaiClass::bonafide, s % 2 == 0 ? PaiClass::print : PaiClass::screen}) {
      const double sign = pai == PaiClass::bonafide ? -1.0 : 1.0;
      const std::string code = subject + "_" + std::string(to_string(pai));
      for (int p = 0; p < patches_per_id; ++p) {
        for (std::size_t k = 0; k < dim; ++k) v[k] = static_cast<float>(sign * mu[k] + noise * rng.normal());
        PatchRecord r;
        r.patch_id = code + "_p" + std::to_string(p);
        r.source_code = code;
        r.label = label_for(pai);
        r.pai = pai;
        r.anon_level = AnonymizationLevel::fully_anonymized;
        r.patch_size = 64;
        set.embeddings.add(r.patch_id, v);
        set.manifest.push_back(r);
      }
    }
  }
  return set;
}

// Rows of `set` whose source subject is in `keep`.
inline fakeidet::EmbeddingFile subset(const EmbeddedSet& set, const std::vector<std::string>& keep) {
  fakeidet::EmbeddingFile out;
  out.backbone_id = set.embeddings.backbone_id;
  out.dim = set.embeddings.dim;
  for (std::size_t i = 0; i < set.embeddings.count(); ++i) {
    const auto& code = set.manifest[i].source_code;
    const auto subject = code.substr(0, code.rfind('_'));
    if (std::find(keep.begin(), keep.end(), subject) != keep.end())
      out.add(set.embeddings.patch_ids[i], set.embeddings.row(i));
  }
  return out;
}

}  // namespace synth
