#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fakeidet/types.hpp"

namespace fakeidet {

struct ScoreRecord {
  std::string patch_id;
  std::string source_code;
  Label label = Label::real;
  PaiClass pai = PaiClass::bonafide;
  double score = 0.0;
};

struct FusedRecord {
  std::string source_code;
  Label label = Label::real;
  PaiClass pai = PaiClass::bonafide;
  double id_score = 0.0;
  std::size_t patch_count = 0;
};

// Arithmetic mean with compensated summation, clamped to [min, max] of the
// inputs. Throws Error{degenerate_data} on an empty list.
double fuse_mean(std::span<const double> scores);

using FusionRule = std::function<double(std::span<const double>)>;

// One fused record per source_code, sorted by source_code. Groups must be
// homogeneous in label and PAI.
std::vector<FusedRecord> group_and_fuse(std::span<const ScoreRecord> records, const FusionRule& rule = fuse_mean);

// CSV: patch_id,source_code,label,pai,score
void write_scores(std::ostream& out, std::span<const ScoreRecord> records);
void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records);
std::vector<ScoreRecord> read_scores(std::istream& in, const std::string& source_name = "<stream>");
std::vector<ScoreRecord> read_scores(const std::filesystem::path& path);

// CSV: source_code,label,pai,id_score
void write_fused(std::ostream& out, std::span<const FusedRecord> records);
void write_fused(const std::filesystem::path& path, std::span<const FusedRecord> records);

// Shortest decimal that round-trips the double.
std::string format_double(double v);

}  // namespace fakeidet
