#include "fakeidet/packager.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "fakeidet/errors.hpp"
#include "fakeidet/hashing.hpp"
#include "fakeidet/rng.hpp"

namespace fakeidet {

namespace {

constexpr const char* kModule = "dataset-packager";
constexpr const char* kManifestName = "manifest.jsonl";
constexpr const char* kVerificationName = "VERIFICATION.json";

const std::set<std::string, std::less<>> kReleaseFields{"patch_id", "source_code", "label", "pai",
                                                        "anon_level", "patch_size", "split"};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, kModule, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, kModule, "write failed for " + path.string());
}

struct FileCheck {
  bool read_ok = false;
  std::string error;
  double black = 0.0;
  std::vector<std::string> text_keys;
};

FileCheck check_file(const std::filesystem::path& path) {
  FileCheck c;
  try {
    const auto img = read_image(path);
    c.black = black_fraction(img);
    c.text_keys = png_text_keys(path);
    c.read_ok = true;
  } catch (const std::exception& e) {
    c.error = e.what();
  }
  return c;
}

}  // namespace

Split SplitAssignment::of(const std::string& subject_id) const {
  const auto it = by_subject.find(subject_id);
  if (it == by_subject.end())
    throw Error(ErrorKind::integrity, kModule, "subject " + subject_id + " has no split assignment");
  return it->second;
}

SplitAssignment split_ids(std::span<const SubjectInfo> subjects, double ratio, std::uint64_t seed,
                          std::optional<int> holdout_template) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorKind::config, kModule, "split ratio must lie in [0,1]");

  std::map<std::string, int> versions;
  for (const auto& s : subjects) {
    const auto [it, inserted] = versions.emplace(s.subject_id, s.template_version);
    if (!inserted && it->second != s.template_version)
      throw Error(ErrorKind::integrity, kModule, "subject " + s.subject_id + " appears with template versions " +
                                                     std::to_string(it->second) + " and " +
                                                     std::to_string(s.template_version));
  }
  const std::size_t n = versions.size();
  const auto n_dev_target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  const std::size_t n_eval_target = n - n_dev_target;

  std::vector<std::string> forced, free;
  for (const auto& [id, version] : versions)
    (holdout_template && version == *holdout_template ? forced : free).push_back(id);

  if (forced.size() > n_eval_target + 1)
    throw Error(ErrorKind::config, kModule,
                std::to_string(forced.size()) + " subjects of held-out template " + std::to_string(*holdout_template) +
                    " exceed the eval share of " + std::to_string(n_eval_target) + " subjects");

  // Order free subjects by a keyed hash so the draw ignores input order.
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  for (auto& id : free) keyed.emplace_back(keyed_hash64(seed, {"split", id}), id);
  std::sort(keyed.begin(), keyed.end());

  SplitAssignment out;
  for (const auto& id : forced) out.by_subject[id] = Split::eval;
  const std::size_t extra_eval = n_eval_target > forced.size() ? n_eval_target - forced.size() : 0;
  for (std::size_t i = 0; i < keyed.size(); ++i)
    out.by_subject[keyed[i].second] = i < extra_eval ? Split::eval : Split::dev;
  for (const auto& [id, split] : out.by_subject) (split == Split::dev ? out.n_dev : out.n_eval) += 1;
  return out;
}

nlohmann::ordered_json to_json(const SplitAssignment& a) {
  nlohmann::ordered_json j;
  j["n_dev"] = a.n_dev;
  j["n_eval"] = a.n_eval;
  auto& m = j["assignments"];
  m = nlohmann::ordered_json::object();
  for (const auto& [id, split] : a.by_subject) m[id] = to_string(split);
  return j;
}

SplitAssignment split_assignment_from_json(const nlohmann::json& j) {
  SplitAssignment a;
  try {
    for (const auto& [id, split] : j.at("assignments").items()) {
      const auto s = parse_split(split.get<std::string>());
      a.by_subject[id] = s;
      (s == Split::dev ? a.n_dev : a.n_eval) += 1;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, kModule, std::string("bad split file: ") + e.what());
  }
  return a;
}

std::string source_code_for(std::string_view salt, std::string_view subject_id, PaiClass pai) {
  return "src_" + hex64(keyed_hash64(salt, {"source_code", subject_id, to_string(pai)}));
}

std::string pixel_digest(const RgbImage& img) {
  return std::to_string(img.width()) + "x" + std::to_string(img.height()) + ":" + content_digest(img.bytes());
}

PackageSummary package_release(std::span<const PatchRecord> manifest, const std::filesystem::path& patch_dir,
                               const std::filesystem::path& out_dir, const PackageOptions& options) {
  namespace fs = std::filesystem;
  if (options.levels.empty()) throw Error(ErrorKind::config, kModule, "no anonymization level selected");
  if (options.levels.count(AnonymizationLevel::non_anonymized))
    throw Error(ErrorKind::policy, kModule, "non-anonymized patches may not be released");
  if (fs::exists(out_dir) && !fs::is_empty(out_dir))
    throw Error(ErrorKind::io, kModule, "release directory " + out_dir.string() + " is not empty");

  std::vector<const PatchRecord*> selected;
  for (const auto& r : manifest)
    if (options.levels.count(r.anon_level)) selected.push_back(&r);

  Rng rng(derive_seed(options.seed, "package.order"));
  rng.shuffle(std::span<const PatchRecord*>(selected));

  PackageSummary summary;
  std::unordered_set<std::string> used;
  std::unordered_set<std::string_view> seen_source;
  fs::create_directories(out_dir);
  for (const auto* r : selected) {
    if (!seen_source.insert(r->patch_id).second)
      throw Error(ErrorKind::integrity, kModule, "duplicate patch_id " + r->patch_id + " in manifest");
    PatchRecord out = *r;
    out.grid.reset();
    out.patch_id = hex64(keyed_hash64(options.seed, {"package.id", r->patch_id}));
    if (!used.insert(out.patch_id).second)
      throw Error(ErrorKind::integrity, kModule, "release id collision; choose another seed");

    const auto img = read_image(patch_dir / (r->patch_id + ".png"));
    const auto split_dir = out_dir / std::string(to_string(out.split));
    fs::create_directories(split_dir);
    // Re-encoding drops any ancillary chunks the source file carried.
    write_png(img, split_dir / (out.patch_id + ".png"));
    summary.release_records.push_back(std::move(out));
  }
  summary.n_patches = summary.release_records.size();

  std::string text;
  for (const auto& r : summary.release_records) text += manifest_line(r, false) + "\n";
  write_text(out_dir / kManifestName, text);

  const auto report = verify_package(out_dir, options.black_threshold);
  write_text(out_dir / kVerificationName, to_json(report).dump(2) + "\n");
  return summary;
}

std::size_t VerificationReport::count(std::string_view kind) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
}

VerificationReport verify_package(const std::filesystem::path& release_dir, double black_threshold) {
  namespace fs = std::filesystem;
  VerificationReport report;
  auto& violations = report.violations;

  const auto manifest_path = release_dir / kManifestName;
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kModule, "cannot open " + manifest_path.string());

  // patch_id -> expected relative file path
  std::map<std::string, fs::path> expected;
  std::map<std::string, std::set<std::string>> group_labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ++report.n_records;
    const std::string where = "manifest line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      violations.push_back({"malformed-record", where, "not valid JSON"});
      continue;
    }
    if (!j.is_object()) {
      violations.push_back({"malformed-record", where, "not a JSON object"});
      continue;
    }
    for (const auto& [key, value] : j.items())
      if (!kReleaseFields.count(key)) violations.push_back({"metadata-leak", where, "field '" + key + "'"});

    PatchRecord r;
    try {
      nlohmann::json clean = nlohmann::json::object();
      for (const auto& [key, value] : j.items())
        if (kReleaseFields.count(key)) clean[key] = value;
      r = parse_manifest_line(clean.dump());
    } catch (const Error& e) {
      violations.push_back({"malformed-record", where, e.detail()});
      continue;
    }
    if (expected.count(r.patch_id)) {
      violations.push_back({"duplicate-id", r.patch_id, where});
      continue;
    }
    expected[r.patch_id] = fs::path(std::string(to_string(r.split))) / (r.patch_id + ".png");
    group_labels[r.source_code].insert(std::string(to_string(r.label)));
  }

  for (const auto& [code, labels] : group_labels)
    if (labels.size() > 1) violations.push_back({"mixed-label-group", code, "labels real and attack share a code"});

  // Every file under the release except the two index files must be a listed patch.
  std::set<fs::path> on_disk;
  for (const auto& entry : fs::recursive_directory_iterator(release_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), release_dir);
    if (rel == kManifestName || rel == kVerificationName) continue;
    on_disk.insert(rel);
  }
  std::set<fs::path> listed;
  for (const auto& [id, rel] : expected) {
    listed.insert(rel);
    if (!on_disk.count(rel)) violations.push_back({"missing-file", id, rel.string()});
  }
  std::vector<fs::path> to_check;
  for (const auto& rel : on_disk) {
    if (!listed.count(rel)) violations.push_back({"orphan-file", rel.string(), "not listed in manifest"});
    to_check.push_back(rel);
  }
  report.n_files = on_disk.size();

  std::vector<FileCheck> checks(to_check.size());
  const auto n = static_cast<std::ptrdiff_t>(to_check.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) checks[i] = check_file(release_dir / to_check[i]);

  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto target = to_check[i].string();
    const auto& c = checks[i];
    if (!c.read_ok) {
      violations.push_back({"io-error", target, c.error});
      continue;
    }
    if (c.black > black_threshold)
      violations.push_back({"black-fraction", target, "black fraction " + std::to_string(c.black)});
    for (const auto& key : c.text_keys) violations.push_back({"metadata-leak", target, "PNG text chunk '" + key + "'"});
  }

  std::sort(violations.begin(), violations.end(), [](const Violation& a, const Violation& b) {
    return std::tie(a.kind, a.target, a.detail) < std::tie(b.kind, b.target, b.detail);
  });
  return report;
}

nlohmann::ordered_json to_json(const VerificationReport& report) {
  nlohmann::ordered_json j;
  j["ok"] = report.ok();
  j["n_records"] = report.n_records;
  j["n_files"] = report.n_files;
  auto v = nlohmann::ordered_json::array();
  for (const auto& x : report.violations) v.push_back({{"kind", x.kind}, {"target", x.target}, {"detail", x.detail}});
  j["violations"] = v;
  return j;
}

std::map<std::string, std::vector<std::string>> pixel_hash_multisets(const std::filesystem::path& release_dir) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& r : read_manifest(release_dir / kManifestName)) {
    const auto img = read_image(release_dir / std::string(to_string(r.split)) / (r.patch_id + ".png"));
    out[r.source_code].push_back(pixel_digest(img));
  }
  for (auto& [code, digests] : out) std::sort(digests.begin(), digests.end());
  return out;
}

}  // namespace fakeidet
