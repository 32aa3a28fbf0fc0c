#include "fakeidet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "fakeidet/errors.hpp"

namespace fakeidet::metrics {

namespace {

constexpr const char* kModule = "metrics";

void require_nonempty(std::span<const double> attack, std::span<const double> bonafide) {
  if (attack.empty() && bonafide.empty())
    throw Error(ErrorKind::degenerate_data, kModule, "no attack and no bona fide scores");
  if (attack.empty()) throw Error(ErrorKind::degenerate_data, kModule, "no attack scores (class 'attack' is empty)");
  if (bonafide.empty())
    throw Error(ErrorKind::degenerate_data, kModule, "no bona fide scores (class 'bonafide' is empty)");
}

void split_classes(std::span<const ScoreRecord> records, std::vector<double>& attack, std::vector<double>& bonafide) {
  for (const auto& r : records) (r.label == Label::attack ? attack : bonafide).push_back(r.score);
}

double sentinel_gap(double v) { return std::max(1e-3, 1e-6 * std::fabs(v)); }

// Rates at every candidate threshold via a merged sweep over sorted scores.
std::vector<DetPoint> sweep(std::span<const double> attack, std::span<const double> bonafide) {
  require_nonempty(attack, bonafide);
  std::vector<double> a(attack.begin(), attack.end());
  std::vector<double> b(bonafide.begin(), bonafide.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());

  std::vector<DetPoint> pts;
  pts.reserve(a.size() + b.size() + 1);
  const double lo = std::min(a.front(), b.front());
  pts.push_back({lo - sentinel_gap(lo), 0.0, 1.0});

  // Walk distinct values; after consuming value u, attacks <= u fall below any
  // threshold in (u, next) and bona fide <= u are no longer rejected.
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() || ib < b.size()) {
    const double u = std::min(ia < a.size() ? a[ia] : INFINITY, ib < b.size() ? b[ib] : INFINITY);
    while (ia < a.size() && a[ia] == u) ++ia;
    while (ib < b.size() && b[ib] == u) ++ib;
    const double apcer_v = static_cast<double>(ia) / na;
    const double bpcer_v = static_cast<double>(b.size() - ib) / nb;
    double tau;
    if (ia < a.size() || ib < b.size()) {
      const double next = std::min(ia < a.size() ? a[ia] : INFINITY, ib < b.size() ? b[ib] : INFINITY);
      tau = u + (next - u) / 2.0;
      if (tau <= u) tau = next;  // adjacent doubles
    } else {
      tau = u + sentinel_gap(u);
    }
    pts.push_back({tau, apcer_v, bpcer_v});
  }
  return pts;
}

}  // namespace

double apcer(std::span<const double> attack_scores, double tau) {
  if (attack_scores.empty()) throw Error(ErrorKind::degenerate_data, kModule, "APCER of an empty attack list");
  const auto n = std::count_if(attack_scores.begin(), attack_scores.end(), [tau](double s) { return s < tau; });
  return static_cast<double>(n) / static_cast<double>(attack_scores.size());
}

double bpcer(std::span<const double> bonafide_scores, double tau) {
  if (bonafide_scores.empty())
    throw Error(ErrorKind::degenerate_data, kModule, "BPCER of an empty bona fide list");
  const auto n = std::count_if(bonafide_scores.begin(), bonafide_scores.end(), [tau](double s) { return s >= tau; });
  return static_cast<double>(n) / static_cast<double>(bonafide_scores.size());
}

std::vector<double> candidate_thresholds(std::span<const double> attack, std::span<const double> bonafide) {
  const auto pts = sweep(attack, bonafide);
  std::vector<double> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(p.threshold);
  return out;
}

std::vector<DetPoint> det_curve(std::span<const double> attack, std::span<const double> bonafide) {
  return sweep(attack, bonafide);
}

std::vector<DetPoint> det_curve(std::span<const ScoreRecord> records) {
  std::vector<double> a, b;
  split_classes(records, a, b);
  return det_curve(a, b);
}

EerResult eer(std::span<const double> attack, std::span<const double> bonafide) {
  const auto pts = sweep(attack, bonafide);
  if (pts.size() == 2) {
    // A single distinct score: report the mean of the two rates at it.
    const double tau = attack.front();
    const double a = apcer(attack, tau), b = bpcer(bonafide, tau);
    return {(a + b) / 2.0, tau, true};
  }
  // APCER - BPCER is non-decreasing: -1 at the first candidate, +1 at the last.
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = pts[i].apcer - pts[i].bpcer;
    if (d == 0.0) return {pts[i].apcer, pts[i].threshold, false};
    if (d > 0.0) {
      const auto& p = pts[i - 1];
      const auto& q = pts[i];
      const double dp = p.apcer - p.bpcer;
      const double t = -dp / (d - dp);
      const double e = p.apcer + t * (q.apcer - p.apcer);
      return {e, p.threshold + t * (q.threshold - p.threshold), false};
    }
  }
  // Unreachable: the last candidate always has APCER 1, BPCER 0.
  throw Error(ErrorKind::integrity, kModule, "no APCER/BPCER crossing found");
}

EerResult eer(std::span<const ScoreRecord> records) {
  std::vector<double> a, b;
  split_classes(records, a, b);
  return eer(a, b);
}

EvalReport evaluate(std::span<const ScoreRecord> records, Level level, bool per_pai) {
  std::vector<ScoreRecord> fused_records;
  std::span<const ScoreRecord> rows = records;
  if (level == Level::id) {
    for (auto& f : group_and_fuse(records))
      fused_records.push_back({f.source_code, f.source_code, f.label, f.pai, f.id_score});
    rows = fused_records;
  }

  EvalReport report;
  report.level = level;
  std::vector<double> attack, bonafide;
  std::map<PaiClass, std::vector<double>> by_pai;
  for (const auto& r : rows) {
    if (r.label == Label::attack) {
      attack.push_back(r.score);
      by_pai[r.pai].push_back(r.score);
    } else {
      bonafide.push_back(r.score);
    }
  }
  report.n_attack = attack.size();
  report.n_bonafide = bonafide.size();
  report.overall = eer(attack, bonafide);
  report.det_points = det_curve(attack, bonafide);

  if (per_pai) {
    double sum = 0.0;
    for (const auto& [pai, scores] : by_pai) {
      report.per_pai.push_back({pai, eer(scores, bonafide), scores.size()});
      sum += report.per_pai.back().eer.eer;
    }
    if (!report.per_pai.empty()) report.average_pai_eer = sum / static_cast<double>(report.per_pai.size());
  }
  return report;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["level"] = to_string(report.level);
  j["eer"] = report.overall.eer;
  j["eer_threshold"] = report.overall.threshold;
  j["degenerate"] = report.overall.degenerate;
  j["counts"] = {{"n_bonafide", report.n_bonafide}, {"n_attack", report.n_attack}};
  if (!report.per_pai.empty()) {
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& p : report.per_pai) {
      per[std::string(fakeidet::to_string(p.pai))] = {{"eer", p.eer.eer},
                                                      {"eer_threshold", p.eer.threshold},
                                                      {"degenerate", p.eer.degenerate},
                                                      {"n_attack", p.n_attack}};
    }
    j["per_pai"] = per;
    j["average_pai_eer"] = *report.average_pai_eer;
  }
  auto pts = nlohmann::ordered_json::array();
  for (const auto& p : report.det_points) pts.push_back({p.threshold, p.apcer, p.bpcer});
  j["det_points"] = pts;
  return j;
}

void write_det_csv(std::ostream& out, std::span<const DetPoint> points) {
  out << "threshold,apcer,bpcer\n";
  for (const auto& p : points)
    out << format_double(p.threshold) << ',' << format_double(p.apcer) << ',' << format_double(p.bpcer) << '\n';
}

void write_det_csv(const std::filesystem::path& path, std::span<const DetPoint> points) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, kModule, "cannot write " + path.string());
  write_det_csv(out, points);
  if (!out) throw Error(ErrorKind::io, kModule, "write failed for " + path.string());
}

Level parse_level(std::string_view s) {
  if (s == "patch") return Level::patch;
  if (s == "id") return Level::id;
  throw Error(ErrorKind::usage, kModule, "level must be 'patch' or 'id', got '" + std::string(s) + "'");
}

std::string_view to_string(Level l) { return l == Level::patch ? "patch" : "id"; }

}  // namespace fakeidet::metrics
