#include "fakeidet/fusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "fakeidet/errors.hpp"

namespace fakeidet {

namespace {

constexpr const char* kModule = "fusion";
constexpr std::string_view kScoresHeader = "patch_id,source_code,label,pai,score";
constexpr std::string_view kFusedHeader = "source_code,label,pai,id_score";

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void check_cell(const std::string& v, const char* what) {
  if (v.empty() || v.find_first_of(",\r\n") != std::string::npos)
    throw Error(ErrorKind::format, kModule, std::string("invalid ") + what + " '" + v + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double fuse_mean(std::span<const double> scores) {
  if (scores.empty())
    throw Error(ErrorKind::degenerate_data, kModule, "cannot fuse an empty score list");
  // Neumaier summation.
  double sum = 0.0, comp = 0.0;
  double lo = scores.front(), hi = scores.front();
  for (double s : scores) {
    const double t = sum + s;
    comp += std::fabs(sum) >= std::fabs(s) ? (sum - t) + s : (s - t) + sum;
    sum = t;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return std::clamp((sum + comp) / static_cast<double>(scores.size()), lo, hi);
}

std::vector<FusedRecord> group_and_fuse(std::span<const ScoreRecord> records, const FusionRule& rule) {
  std::map<std::string_view, std::vector<const ScoreRecord*>> groups;
  for (const auto& r : records) groups[r.source_code].push_back(&r);

  std::vector<FusedRecord> out;
  out.reserve(groups.size());
  std::vector<double> scores;
  for (const auto& [code, members] : groups) {
    const auto* first = members.front();
    scores.clear();
    for (const auto* m : members) {
      if (m->label != first->label)
        throw Error(ErrorKind::integrity, kModule, "source_code " + std::string(code) + " mixes labels " +
                                                       std::string(to_string(first->label)) + " and " +
                                                       std::string(to_string(m->label)));
      if (m->pai != first->pai)
        throw Error(ErrorKind::integrity, kModule, "source_code " + std::string(code) + " mixes PAI classes " +
                                                       std::string(to_string(first->pai)) + " and " +
                                                       std::string(to_string(m->pai)));
      scores.push_back(m->score);
    }
    out.push_back({std::string(code), first->label, first->pai, rule(scores), members.size()});
  }
  return out;
}

void write_scores(std::ostream& out, std::span<const ScoreRecord> records) {
  out << kScoresHeader << '\n';
  for (const auto& r : records) {
    check_cell(r.patch_id, "patch_id");
    check_cell(r.source_code, "source_code");
    out << r.patch_id << ',' << r.source_code << ',' << to_string(r.label) << ',' << to_string(r.pai) << ','
        << format_double(r.score) << '\n';
  }
}

void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, kModule, "cannot write " + path.string());
  write_scores(out, records);
  if (!out) throw Error(ErrorKind::io, kModule, "write failed for " + path.string());
}

std::vector<ScoreRecord> read_scores(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line) || line != kScoresHeader)
    throw Error(ErrorKind::format, kModule, source_name + ": expected header '" + std::string(kScoresHeader) + "'");
  std::vector<ScoreRecord> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const std::string where = source_name + ":" + std::to_string(n);
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw Error(ErrorKind::format, kModule, where + ": expected 5 columns");
    ScoreRecord r;
    r.patch_id = cells[0];
    r.source_code = cells[1];
    if (r.patch_id.empty() || r.source_code.empty())
      throw Error(ErrorKind::format, kModule, where + ": empty identifier");
    try {
      r.label = parse_label(cells[2]);
      r.pai = parse_pai(cells[3]);
    } catch (const Error& e) {
      throw Error(ErrorKind::format, kModule, where + ": " + e.detail());
    }
    if (r.label != label_for(r.pai))
      throw Error(ErrorKind::integrity, kModule, where + ": label contradicts PAI class");
    const auto s = cells[4];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), r.score);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !(r.score >= 0.0 && r.score <= 1.0))
      throw Error(ErrorKind::format, kModule, where + ": score must be a number in [0,1]");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kModule, "cannot open " + path.string());
  return read_scores(in, path.string());
}

void write_fused(std::ostream& out, std::span<const FusedRecord> records) {
  out << kFusedHeader << '\n';
  for (const auto& r : records)
    out << r.source_code << ',' << to_string(r.label) << ',' << to_string(r.pai) << ','
        << format_double(r.id_score) << '\n';
}

void write_fused(const std::filesystem::path& path, std::span<const FusedRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, kModule, "cannot write " + path.string());
  write_fused(out, records);
  if (!out) throw Error(ErrorKind::io, kModule, "write failed for " + path.string());
}

}  // namespace fakeidet
