#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fakeidet/patch.hpp"
#include "fakeidet/types.hpp"

namespace fakeidet {

struct SubjectInfo {
  std::string subject_id;
  int template_version = 0;
};

struct SplitAssignment {
  std::map<std::string, Split> by_subject;
  std::size_t n_dev = 0;
  std::size_t n_eval = 0;

  // Throws Error{integrity} for an unknown subject.
  Split of(const std::string& subject_id) const;
};

// Assigns whole subjects (the bona fide ID and every attack derived from it)
// to dev or eval. round(ratio * n) subjects go to dev. With a holdout
// template, every subject of that version is forced into eval; this may
// move the split by at most one subject, otherwise Error{config}.
SplitAssignment split_ids(std::span<const SubjectInfo> subjects, double ratio, std::uint64_t seed,
                          std::optional<int> holdout_template = std::nullopt);

nlohmann::ordered_json to_json(const SplitAssignment& a);
SplitAssignment split_assignment_from_json(const nlohmann::json& j);

// Opaque per-ID code: keyed hash of (subject, PAI) under a salt that is kept
// outside any release.
std::string source_code_for(std::string_view salt, std::string_view subject_id, PaiClass pai);

struct PackageOptions {
  std::uint64_t seed = 0;
  std::set<AnonymizationLevel> levels{AnonymizationLevel::pseudo_anonymized, AnonymizationLevel::fully_anonymized};
  double black_threshold = 0.9;
};

struct PackageSummary {
  std::size_t n_patches = 0;
  std::vector<PatchRecord> release_records;  // in release order, without positions
};

// Writes <out>/<split>/<patch_id>.png, <out>/manifest.jsonl and
// <out>/VERIFICATION.json. Refuses non-anonymized levels (Error{policy}) and
// a non-empty output directory (Error{io}).
PackageSummary package_release(std::span<const PatchRecord> manifest, const std::filesystem::path& patch_dir,
                               const std::filesystem::path& out_dir, const PackageOptions& options);

struct Violation {
  std::string kind;  // black-fraction, metadata-leak, missing-file, orphan-file,
                     // duplicate-id, mixed-label-group, malformed-record, io-error
  std::string target;
  std::string detail;
};

struct VerificationReport {
  std::size_t n_records = 0;
  std::size_t n_files = 0;
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::size_t count(std::string_view kind) const;
};

VerificationReport verify_package(const std::filesystem::path& release_dir, double black_threshold = 0.9);
nlohmann::ordered_json to_json(const VerificationReport& report);

// source_code -> sorted pixel digests of its patches, read from a release.
std::map<std::string, std::vector<std::string>> pixel_hash_multisets(const std::filesystem::path& release_dir);

// Digest of an image's size and pixel bytes.
std::string pixel_digest(const RgbImage& img);

}  // namespace fakeidet
