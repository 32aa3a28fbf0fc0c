#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "fakeidet/anonymizer.hpp"
#include "fakeidet/errors.hpp"
#include "support/synthetic.hpp"

using namespace fakeidet;

namespace {

std::size_t count_changed(const RgbImage& a, const RgbImage& b) {
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) n += !(a.at(x, y) == b.at(x, y));
  return n;
}

const FieldAnnotation& field(const AnnotatedIDImage& img, FieldKind k) {
  for (const auto& f : img.info.fields)
    if (f.kind == k) return f;
  throw std::logic_error("no such field");
}

}  // namespace

TEST(Anonymizer, NonAnonymizedIsIdentity) {
  const auto img = synth::id_card(1);
  EXPECT_EQ(apply_anonymization(img, AnonymizationLevel::non_anonymized, 99), img.pixels);
}

TEST(Anonymizer, FullyMasksExactlyTheBox) {
  AnnotatedIDImage img;
  img.info.image_id = "sq";
  img.pixels = synth::noise_image(100, 100, 3);
  img.info.fields = {{FieldKind::id_number, {10, 10, 20, 20}}};
  const auto out = apply_anonymization(img, AnonymizationLevel::fully_anonymized, 0);
  EXPECT_EQ(count_changed(img.pixels, out), 400u);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) {
      if (img.info.fields[0].box.contains(x, y))
        EXPECT_EQ(out.at(x, y), kBlack);
      else
        EXPECT_EQ(out.at(x, y), img.pixels.at(x, y));
    }
}

TEST(Anonymizer, PseudoNameSurnameContractOverSeeds) {
  const auto img = synth::id_card(5);
  const auto& name = field(img, FieldKind::name).box;
  const auto& surname = field(img, FieldKind::surname).box;
  int name_hidden = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto out = apply_anonymization(img, AnonymizationLevel::pseudo_anonymized, seed);
    const auto n = synth::box_stats(out, name);
    const auto s = synth::box_stats(out, surname);
    const bool n_full = n.black_fraction() == 1.0;
    const bool s_full = s.black_fraction() == 1.0;
    ASSERT_NE(n_full, s_full) << "seed " << seed;
    const auto& partial = n_full ? s : n;
    const auto& partial_box = n_full ? surname : name;
    EXPECT_GT(partial.visible_columns, 0);
    EXPECT_LE(partial.visible_columns, 0.30 * partial_box.w) << "seed " << seed;
    name_hidden += n_full;
  }
  // Both outcomes of the coin occur.
  EXPECT_GT(name_hidden, 20);
  EXPECT_LT(name_hidden, 80);
}

TEST(Anonymizer, PseudoOtherFieldsKeepOneContiguousRegion) {
  const auto img = synth::id_card(8);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto out = apply_anonymization(img, AnonymizationLevel::pseudo_anonymized, seed);
    for (const auto& f : img.info.fields) {
      if (f.kind == FieldKind::name || f.kind == FieldKind::surname) continue;
      const auto st = synth::box_stats(out, f.box);
      EXPECT_GE(st.black_fraction(), 0.70) << to_string(f.kind);
      ASSERT_GT(st.visible(), 0u) << to_string(f.kind);
      const auto bbox_area = static_cast<std::size_t>(st.vx1 - st.vx0 + 1) * (st.vy1 - st.vy0 + 1);
      EXPECT_EQ(bbox_area, st.visible()) << "visible region of " << to_string(f.kind) << " is not one rectangle";
    }
  }
}

TEST(Anonymizer, PseudoWithOnlyNameHidesIt) {
  auto img = synth::id_card(2);
  std::erase_if(img.info.fields, [](const auto& f) { return f.kind == FieldKind::surname; });
  const auto out = apply_anonymization(img, AnonymizationLevel::pseudo_anonymized, 4);
  EXPECT_EQ(synth::box_stats(out, field(img, FieldKind::name).box).black_fraction(), 1.0);
}

TEST(Anonymizer, IdempotentAndOutsideUntouched) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    auto img = synth::id_card(100 + trial);
    img.info.fields.push_back({FieldKind::other_sensitive,
                               {static_cast<int>(rng.below(150)), static_cast<int>(rng.below(80)),
                                1 + static_cast<int>(rng.below(50)), 1 + static_cast<int>(rng.below(40))}});
    for (auto level : {AnonymizationLevel::non_anonymized, AnonymizationLevel::pseudo_anonymized,
                       AnonymizationLevel::fully_anonymized}) {
      const auto once = apply_anonymization(img, level, trial);
      AnnotatedIDImage again = img;
      again.pixels = once;
      EXPECT_EQ(apply_anonymization(again, level, trial), once);
      for (int y = 0; y < img.pixels.height(); ++y)
        for (int x = 0; x < img.pixels.width(); ++x) {
          const bool inside = std::any_of(img.info.fields.begin(), img.info.fields.end(),
                                          [&](const auto& f) { return f.box.contains(x, y); });
          if (!inside) ASSERT_EQ(once.at(x, y), img.pixels.at(x, y));
        }
    }
  }
}

TEST(Anonymizer, DeterministicGivenSeed) {
  const auto img = synth::id_card(9);
  EXPECT_EQ(apply_anonymization(img, AnonymizationLevel::pseudo_anonymized, 7),
            apply_anonymization(img, AnonymizationLevel::pseudo_anonymized, 7));
}

TEST(Anonymizer, OutOfBoundsBoxIsAnnotationError) {
  auto img = synth::id_card(1);
  img.info.fields.push_back({FieldKind::expiry, {190, 100, 20, 30}});
  try {
    apply_anonymization(img, AnonymizationLevel::fully_anonymized, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::annotation);
  }
}

TEST(Anonymizer, SecondFaceIsAnnotationError) {
  auto img = synth::id_card(1);
  img.info.fields.push_back({FieldKind::face, {0, 0, 5, 5}});
  EXPECT_THROW(apply_anonymization(img, AnonymizationLevel::non_anonymized, 0), Error);
}

TEST(Anonymizer, PseudoWithoutNamesIsPolicyError) {
  auto img = synth::id_card(1);
  std::erase_if(img.info.fields,
                [](const auto& f) { return f.kind == FieldKind::name || f.kind == FieldKind::surname; });
  try {
    apply_anonymization(img, AnonymizationLevel::pseudo_anonymized, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::policy);
    EXPECT_NE(std::string(e.what()).find("name, surname"), std::string::npos);
  }
}

TEST(Anonymizer, MaskSurvivesLosslessRoundTrip) {
  const auto img = synth::id_card(12);
  const auto out = apply_anonymization(img, AnonymizationLevel::fully_anonymized, 3);
  const auto path = std::filesystem::temp_directory_path() / "fakeidet_anon_roundtrip.png";
  write_png(out, path);
  EXPECT_EQ(read_image(path), out);
  std::filesystem::remove(path);
}

TEST(Anonymizer, ReadsAnnotationDocument) {
  const auto dir = std::filesystem::temp_directory_path() / "fakeidet_anno_doc";
  std::filesystem::create_directories(dir);
  write_png(synth::noise_image(40, 30, 1), dir / "front.png");
  std::ofstream(dir / "front.json") << R"({"image": "front.png", "width": 40, "height": 30, "subject": "s1",
    "template_version": 3, "pai": "screen", "fields": [{"type": "name", "x": 1, "y": 2, "w": 10, "h": 5}]})";
  const auto doc = read_annotation(dir / "front.json");
  EXPECT_EQ(doc.info.image_id, "front");
  EXPECT_EQ(doc.info.pai, PaiClass::screen);
  EXPECT_EQ(doc.info.fields.size(), 1u);
  const auto img = load_annotated_image(doc);
  EXPECT_EQ(img.pixels.width(), 40);
  EXPECT_EQ(img.label(), Label::attack);
  std::filesystem::remove_all(dir);
}
