#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fakeidet/fusion.hpp"
#include "fakeidet/types.hpp"

// ISO/IEC 30107-3 error rates. Decision rule everywhere: a score >= tau is
// classified as an attack.
namespace fakeidet::metrics {

// Fraction of attack scores below tau.
double apcer(std::span<const double> attack_scores, double tau);
// Fraction of bona fide scores at or above tau.
double bpcer(std::span<const double> bonafide_scores, double tau);

struct DetPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

// Candidate thresholds: one below the minimum, the midpoint between each pair
// of consecutive distinct scores, one above the maximum. Strictly increasing.
std::vector<double> candidate_thresholds(std::span<const double> attack, std::span<const double> bonafide);

std::vector<DetPoint> det_curve(std::span<const double> attack, std::span<const double> bonafide);
std::vector<DetPoint> det_curve(std::span<const ScoreRecord> records);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  // All scores identical: the rates jump past each other at one value.
  bool degenerate = false;
};

// Locates where APCER - BPCER changes sign along the candidates and
// interpolates both curves linearly between the bracketing pair. An exact
// tie at a candidate is returned as is (the smallest such candidate).
EerResult eer(std::span<const double> attack, std::span<const double> bonafide);
EerResult eer(std::span<const ScoreRecord> records);

enum class Level { patch, id };

struct PaiResult {
  PaiClass pai = PaiClass::print;
  EerResult eer;
  std::size_t n_attack = 0;
};

struct EvalReport {
  Level level = Level::patch;
  EerResult overall;
  std::vector<PaiResult> per_pai;  // one per attack class present, sorted by class
  std::optional<double> average_pai_eer;
  std::vector<DetPoint> det_points;
  std::size_t n_bonafide = 0;
  std::size_t n_attack = 0;
};

// At id level the records are fused per source_code first.
EvalReport evaluate(std::span<const ScoreRecord> records, Level level, bool per_pai);

nlohmann::ordered_json to_json(const EvalReport& report);
void write_det_csv(std::ostream& out, std::span<const DetPoint> points);
void write_det_csv(const std::filesystem::path& path, std::span<const DetPoint> points);

Level parse_level(std::string_view s);
std::string_view to_string(Level l);

}  // namespace fakeidet::metrics
