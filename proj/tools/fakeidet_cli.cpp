// fakeidet: command-line driver for the patch-wise fake ID detection pipeline.
//
//   anonymize -> extract -> (external embedding) -> train -> score -> fuse
//   -> evaluate -> package / verify, plus crossdb for external attack sets.
//
// Exit codes: 0 success, 2 usage error, 3 data/contract error, 4 I/O error.
// Failures print {"error": {...}} on stderr.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fakeidet/anonymizer.hpp"
#include "fakeidet/embedding_io.hpp"
#include "fakeidet/errors.hpp"
#include "fakeidet/fusion.hpp"
#include "fakeidet/hashing.hpp"
#include "fakeidet/head.hpp"
#include "fakeidet/kernels.hpp"
#include "fakeidet/metrics.hpp"
#include "fakeidet/packager.hpp"
#include "fakeidet/patch.hpp"

namespace fs = std::filesystem;
using namespace fakeidet;

namespace {

constexpr const char* kModule = "cli";

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, kModule, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, kModule, "write failed for " + path.string());
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, kModule, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, kModule, path.string() + ": " + e.what());
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kModule, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<PatchRecord> read_manifests(const std::vector<std::string>& paths) {
  std::vector<PatchRecord> all;
  for (const auto& p : paths) {
    auto part = read_manifest(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

std::uint64_t anonymization_seed(std::uint64_t seed) { return derive_seed(seed, "anonymize"); }

// Scores every embedded patch; manifest supplies source_code, label and PAI.
std::vector<ScoreRecord> score_embeddings(const HeadModel& model, const EmbeddingFile& emb,
                                          const std::vector<PatchRecord>& manifest) {
  std::map<std::string_view, const PatchRecord*> by_id;
  for (const auto& r : manifest) by_id.emplace(r.patch_id, &r);
  const auto scores = predict_all(model, emb);
  std::vector<ScoreRecord> out;
  out.reserve(emb.count());
  for (std::size_t i = 0; i < emb.count(); ++i) {
    const auto it = by_id.find(emb.patch_ids[i]);
    if (it == by_id.end())
      throw Error(ErrorKind::integrity, kModule, "patch " + emb.patch_ids[i] + " has an embedding but no manifest record");
    const auto& r = *it->second;
    out.push_back({r.patch_id, r.source_code, r.label, r.pai, scores[i]});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.patch_id < b.patch_id; });
  return out;
}

std::set<AnonymizationLevel> parse_levels(const std::vector<std::string>& tokens) {
  std::set<AnonymizationLevel> levels;
  for (const auto& t : tokens) {
    std::stringstream ss(t);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) levels.insert(parse_level(part));
    }
  }
  return levels;
}

struct AnonymizeArgs {
  std::string image, annotations, level = "fully", out;
  std::uint64_t seed = 0;
};

int run_anonymize(const AnonymizeArgs& a) {
  const auto doc = read_annotation(a.annotations);
  const auto img = load_annotated_image(doc, a.image);
  const auto level = parse_level(a.level);
  const auto masked = apply_anonymization(img, level, anonymization_seed(a.seed));
  const fs::path out = a.out;
  write_png(masked, out);

  auto stamped = doc.raw;
  stamped["image"] = out.filename().string();
  stamped["anonymization"] = {{"level", std::string(to_string(level))}, {"seed", a.seed}};
  fs::path stamped_path = out;
  stamped_path.replace_extension(".json");
  std::ofstream js(stamped_path, std::ios::binary | std::ios::trunc);
  if (!js) throw Error(ErrorKind::io, kModule, "cannot write " + stamped_path.string());
  js << stamped.dump(2) << '\n';

  nlohmann::ordered_json summary{{"status", "ok"}, {"image_id", doc.info.image_id},
                                 {"level", std::string(to_string(level))}, {"out", out.string()},
                                 {"annotations", stamped_path.string()}};
  std::cout << summary.dump() << '\n';
  return 0;
}

struct ExtractArgs {
  std::string image, annotations, level = "fully", out_dir, manifest, split = "dev", split_file, salt_file;
  PatchConfig cfg;
  std::uint64_t seed = 0;
};

int run_extract(const ExtractArgs& a) {
  a.cfg.validate();
  const auto doc = read_annotation(a.annotations);
  const auto img = load_annotated_image(doc, a.image);
  const auto level = parse_level(a.level);

  AnnotatedIDImage masked;
  masked.info = img.info;
  // Idempotent, so an already-masked input comes through unchanged.
  masked.pixels = apply_anonymization(img, level, anonymization_seed(a.seed));

  const std::string salt = a.salt_file.empty() ? hex64(derive_seed(a.seed, "source_code_salt"))
                                               : read_text_file(a.salt_file);
  ExtractionContext ctx;
  ctx.level = level;
  ctx.source_code = source_code_for(salt, doc.info.subject_id, doc.info.pai);
  ctx.split = a.split_file.empty() ? parse_split(a.split)
                                   : split_assignment_from_json(read_json_file(a.split_file)).of(doc.info.subject_id);

  const auto result = extract_patches(masked, a.cfg, a.seed, ctx);
  fs::create_directories(a.out_dir);
  std::vector<PatchRecord> records;
  for (const auto& p : result.patches) {
    write_png(p.pixels, fs::path(a.out_dir) / (p.record.patch_id + ".png"));
    records.push_back(p.record);
  }
  append_manifest(a.manifest, records);

  nlohmann::ordered_json summary{{"status", result.empty_warning ? "warning" : "ok"},
                                 {"image_id", doc.info.image_id},
                                 {"grid", result.grid_count},
                                 {"discarded_black", result.discarded_black},
                                 {"dropped_retention", result.dropped_retention},
                                 {"kept", result.patches.size()}};
  if (result.empty_warning) summary["warning"] = "no patch survived filtering and retention";
  std::cout << summary.dump() << '\n';
  return 0;
}

struct SplitArgs {
  std::vector<std::string> annotations;
  double ratio = 0.8;
  std::uint64_t seed = 0;
  std::optional<int> holdout;
  std::string out;
};

int run_split(const SplitArgs& a) {
  std::vector<SubjectInfo> subjects;
  for (const auto& p : a.annotations) {
    const auto doc = read_annotation(p);
    subjects.push_back({doc.info.subject_id, doc.info.template_version});
  }
  const auto assignment = split_ids(subjects, a.ratio, a.seed, a.holdout);
  write_json_file(a.out, to_json(assignment));
  std::cout << nlohmann::ordered_json{{"status", "ok"}, {"n_dev", assignment.n_dev}, {"n_eval", assignment.n_eval}}.dump()
            << '\n';
  return 0;
}

struct TrainArgs {
  std::string train_emb, val_emb, out;
  std::vector<std::string> manifests;
  TrainConfig cfg;
};

int run_train(const TrainArgs& a) {
  const auto manifest = read_manifests(a.manifests);
  const auto train = join_labels(read_embeddings(fs::path(a.train_emb)), manifest);
  const auto val = join_labels(read_embeddings(fs::path(a.val_emb)), manifest);
  const auto model = train_head(train, val, a.cfg);
  save_head(model, a.out);
  nlohmann::ordered_json summary{{"status", "ok"},
                                 {"epochs_run", model.meta.epochs_run},
                                 {"best_epoch", model.meta.best_epoch},
                                 {"best_val_loss", model.meta.best_val_loss},
                                 {"early_stopped", model.meta.early_stopped}};
  std::cout << summary.dump() << '\n';
  return 0;
}

struct ScoreArgs {
  std::string model, emb, out;
  std::vector<std::string> manifests;
};

int run_score(const ScoreArgs& a) {
  const auto model = load_head(a.model);
  const auto emb = read_embeddings(fs::path(a.emb));
  const auto records = score_embeddings(model, emb, read_manifests(a.manifests));
  write_scores(fs::path(a.out), records);
  std::cout << nlohmann::ordered_json{{"status", "ok"}, {"scored", records.size()}}.dump() << '\n';
  return 0;
}

struct FuseArgs {
  std::string scores, out;
};

int run_fuse(const FuseArgs& a) {
  const auto fused = group_and_fuse(read_scores(fs::path(a.scores)));
  write_fused(fs::path(a.out), fused);
  std::cout << nlohmann::ordered_json{{"status", "ok"}, {"ids", fused.size()}}.dump() << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string scores, level = "patch", report, det;
  bool per_pai = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto records = read_scores(fs::path(a.scores));
  const auto report = metrics::evaluate(records, metrics::parse_level(a.level), a.per_pai);
  const auto j = metrics::to_json(report);
  if (!a.det.empty()) metrics::write_det_csv(fs::path(a.det), report.det_points);
  if (a.report.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(a.report, j);
    std::cout << nlohmann::ordered_json{{"status", "ok"}, {"eer", report.overall.eer}}.dump() << '\n';
  }
  return 0;
}

struct PackageArgs {
  std::string manifest, patch_dir, out;
  std::vector<std::string> levels{"pseudo,fully"};
  std::uint64_t seed = 0;
  double black_threshold = 0.9;
};

int run_package(const PackageArgs& a) {
  PackageOptions opt;
  opt.seed = a.seed;
  opt.levels = parse_levels(a.levels);
  opt.black_threshold = a.black_threshold;
  const auto manifest = read_manifest(a.manifest);
  const auto summary = package_release(manifest, a.patch_dir, a.out, opt);
  const auto report = verify_package(a.out, a.black_threshold);
  std::cout << nlohmann::ordered_json{{"status", report.ok() ? "ok" : "violations"},
                                      {"patches", summary.n_patches},
                                      {"violations", report.violations.size()}}
                   .dump()
            << '\n';
  return report.ok() ? 0 : 3;
}

struct VerifyArgs {
  std::string release, report;
  double black_threshold = 0.9;
};

int run_verify(const VerifyArgs& a) {
  const auto report = verify_package(a.release, a.black_threshold);
  const auto j = to_json(report);
  if (a.report.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(a.report, j);
  return report.ok() ? 0 : 3;
}

struct CrossDbArgs {
  std::string model, external_emb, bonafide_emb, report, scores_out;
  std::vector<std::string> manifests;
};

nlohmann::ordered_json crossdb_report(const metrics::EvalReport& patch, const metrics::EvalReport& id) {
  nlohmann::ordered_json j;
  j["mode"] = "crossdb";
  auto table = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < patch.per_pai.size(); ++i) {
    const auto& p = patch.per_pai[i];
    const auto it = std::find_if(id.per_pai.begin(), id.per_pai.end(), [&](const auto& q) { return q.pai == p.pai; });
    nlohmann::ordered_json row{{"pai", std::string(to_string(p.pai))},
                               {"patch_eer", p.eer.eer},
                               {"n_attack_patches", p.n_attack}};
    if (it != id.per_pai.end()) {
      row["id_eer"] = it->eer.eer;
      row["n_attack_ids"] = it->n_attack;
    }
    table.push_back(row);
  }
  j["table"] = table;
  j["average"] = {{"patch_eer", patch.average_pai_eer.value_or(0.0)}, {"id_eer", id.average_pai_eer.value_or(0.0)}};
  j["patch_level"] = metrics::to_json(patch);
  j["id_level"] = metrics::to_json(id);
  return j;
}

int run_crossdb(const CrossDbArgs& a) {
  const auto model = load_head(a.model);
  const auto manifest = read_manifests(a.manifests);
  auto external = score_embeddings(model, read_embeddings(fs::path(a.external_emb)), manifest);
  const auto bonafide = score_embeddings(model, read_embeddings(fs::path(a.bonafide_emb)), manifest);

  std::vector<ScoreRecord> records;
  for (auto& r : external) {
    if (r.label != Label::attack)
      throw Error(ErrorKind::integrity, kModule, "external embedding " + r.patch_id + " is not an attack sample");
    records.push_back(std::move(r));
  }
  for (const auto& r : bonafide) {
    if (r.label != Label::real)
      throw Error(ErrorKind::integrity, kModule, "bona fide embedding " + r.patch_id + " is labeled as an attack");
    records.push_back(r);
  }
  std::sort(records.begin(), records.end(), [](const auto& x, const auto& y) { return x.patch_id < y.patch_id; });
  if (!a.scores_out.empty()) write_scores(fs::path(a.scores_out), records);

  const auto patch = metrics::evaluate(records, metrics::Level::patch, true);
  const auto id = metrics::evaluate(records, metrics::Level::id, true);
  const auto j = crossdb_report(patch, id);
  if (a.report.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(a.report, j);
  return 0;
}

void print_error(const std::string& module, const std::string& kind, const std::string& message,
                 const nlohmann::json& diagnostics = nullptr) {
  nlohmann::ordered_json j;
  j["error"] = {{"module", module}, {"kind", kind}, {"message", message}};
  if (!diagnostics.is_null()) j["error"]["diagnostics"] = diagnostics;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fakeidet - privacy-preserving patch-wise fake ID detection toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  AnonymizeArgs anon;
  auto* c_anon = app.add_subcommand("anonymize", "Mask sensitive fields of an annotated ID image");
  c_anon->add_option("--image", anon.image, "Image file (defaults to the path in the annotation)");
  c_anon->add_option("--annotations", anon.annotations, "Annotation JSON")->required();
  c_anon->add_option("--level", anon.level, "non | pseudo | fully");
  c_anon->add_option("--seed", anon.seed, "Seed for every random choice");
  c_anon->add_option("--out", anon.out, "Output PNG; the stamped annotation goes next to it")->required();

  ExtractArgs ext;
  auto* c_ext = app.add_subcommand("extract", "Anonymize and tile an ID image into retained patches");
  c_ext->add_option("--image", ext.image, "Image file (defaults to the path in the annotation)");
  c_ext->add_option("--annotations", ext.annotations, "Annotation JSON")->required();
  c_ext->add_option("--level", ext.level, "non | pseudo | fully");
  c_ext->add_option("--size", ext.cfg.patch_size, "Patch side in pixels");
  c_ext->add_option("--p", ext.cfg.retention_p, "Retention probability");
  c_ext->add_option("--black-threshold", ext.cfg.black_discard_threshold,
                    "Discard patches whose black fraction exceeds this");
  c_ext->add_option("--seed", ext.seed, "Seed for every random choice");
  c_ext->add_option("--out-dir", ext.out_dir, "Directory for <patch_id>.png files")->required();
  c_ext->add_option("--manifest", ext.manifest, "Internal manifest (JSON lines, appended)")->required();
  c_ext->add_option("--split", ext.split, "dev | eval | external");
  c_ext->add_option("--split-file", ext.split_file, "Subject split JSON from `split`; overrides --split");
  c_ext->add_option("--salt-file", ext.salt_file, "Secret salt for source codes (default: derived from --seed)");

  SplitArgs spl;
  auto* c_split = app.add_subcommand("split", "Assign subjects to dev/eval splits");
  c_split->add_option("--annotations", spl.annotations, "Annotation JSON files")->required();
  c_split->add_option("--ratio", spl.ratio, "Dev fraction of subjects");
  c_split->add_option("--seed", spl.seed, "Seed");
  c_split->add_option("--holdout-template", spl.holdout, "Template version forced into eval");
  c_split->add_option("--out", spl.out, "Split assignment JSON")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the sigmoid head on frozen embeddings");
  c_train->add_option("--train-emb", tr.train_emb, "FIDEMB1 training embeddings")->required();
  c_train->add_option("--val-emb", tr.val_emb, "FIDEMB1 validation embeddings")->required();
  c_train->add_option("--manifest", tr.manifests, "Manifest(s) providing labels")->required();
  c_train->add_option("--lr", tr.cfg.learning_rate, "Adam learning rate");
  c_train->add_option("--beta1", tr.cfg.beta1, "Adam beta1");
  c_train->add_option("--beta2", tr.cfg.beta2, "Adam beta2");
  c_train->add_option("--eps", tr.cfg.epsilon, "Adam epsilon");
  c_train->add_option("--epochs", tr.cfg.max_epochs, "Maximum epochs");
  c_train->add_option("--patience", tr.cfg.patience, "Epochs without validation improvement before stopping");
  c_train->add_option("--batch", tr.cfg.batch_size, "Mini-batch size (0 = full batch)");
  c_train->add_option("--seed", tr.cfg.seed, "Shuffling seed");
  c_train->add_flag("--l2-normalize", tr.cfg.l2_normalize, "L2-normalize embeddings");
  c_train->add_option("--out", tr.out, "Model JSON (FIDHEAD1)")->required();

  ScoreArgs sc;
  auto* c_score = app.add_subcommand("score", "Score embeddings with a trained head");
  c_score->add_option("--model", sc.model, "Model JSON")->required();
  c_score->add_option("--emb", sc.emb, "FIDEMB1 embeddings")->required();
  c_score->add_option("--manifest", sc.manifests, "Manifest(s) for the embedded patches")->required();
  c_score->add_option("--out", sc.out, "Scores CSV")->required();

  FuseArgs fu;
  auto* c_fuse = app.add_subcommand("fuse", "Fuse patch scores into ID scores (mean)");
  c_fuse->add_option("--scores", fu.scores, "Scores CSV")->required();
  c_fuse->add_option("--out", fu.out, "Fused CSV")->required();

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "APCER/BPCER/EER report");
  c_eval->add_option("--scores", ev.scores, "Scores CSV")->required();
  c_eval->add_option("--level", ev.level, "patch | id")->check(CLI::IsMember({"patch", "id"}));
  c_eval->add_flag("--per-pai", ev.per_pai, "Per-PAI EER against all bona fide");
  c_eval->add_option("--report", ev.report, "Report JSON (stdout if omitted)");
  c_eval->add_option("--det", ev.det, "DET points CSV");

  PackageArgs pk;
  auto* c_pack = app.add_subcommand("package", "Build a reconstruction-resistant release");
  c_pack->add_option("--manifest", pk.manifest, "Internal manifest")->required();
  c_pack->add_option("--patch-dir", pk.patch_dir, "Directory holding <patch_id>.png")->required();
  c_pack->add_option("--seed", pk.seed, "Nomenclature and order seed");
  c_pack->add_option("--levels", pk.levels, "Levels to release: pseudo, fully (comma separated)");
  c_pack->add_option("--black-threshold", pk.black_threshold, "Verifier black-fraction limit");
  c_pack->add_option("--out", pk.out, "Release directory (must be empty)")->required();

  VerifyArgs vf;
  auto* c_verify = app.add_subcommand("verify", "Audit a release directory");
  c_verify->add_option("--release", vf.release, "Release directory")->required();
  c_verify->add_option("--black-threshold", vf.black_threshold, "Black-fraction limit");
  c_verify->add_option("--report", vf.report, "Report JSON (stdout if omitted)");

  CrossDbArgs cx;
  auto* c_cross = app.add_subcommand("crossdb", "Evaluate external attacks against held-out bona fide");
  c_cross->add_option("--model", cx.model, "Model JSON")->required();
  c_cross->add_option("--external-emb", cx.external_emb, "FIDEMB1 embeddings of external attacks")->required();
  c_cross->add_option("--bonafide-emb", cx.bonafide_emb, "FIDEMB1 embeddings of held-out bona fide")->required();
  c_cross->add_option("--manifest", cx.manifests, "Manifest(s) covering both embedding files")->required();
  c_cross->add_option("--report", cx.report, "Report JSON (stdout if omitted)");
  c_cross->add_option("--scores-out", cx.scores_out, "Also write the combined scores CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(kModule, "usage", e.what());
    return 2;
  }

  try {
    kernels::configure_threads_from_env();
    if (c_anon->parsed()) return run_anonymize(anon);
    if (c_ext->parsed()) return run_extract(ext);
    if (c_split->parsed()) return run_split(spl);
    if (c_train->parsed()) return run_train(tr);
    if (c_score->parsed()) return run_score(sc);
    if (c_fuse->parsed()) return run_fuse(fu);
    if (c_eval->parsed()) return run_evaluate(ev);
    if (c_pack->parsed()) return run_package(pk);
    if (c_verify->parsed()) return run_verify(vf);
    if (c_cross->parsed()) return run_crossdb(cx);
  } catch (const TrainingAborted& e) {
    print_error(e.module(), to_string(e.kind()), e.detail(), e.diagnostics());
    return exit_code_for(e.kind());
  } catch (const Error& e) {
    print_error(e.module(), to_string(e.kind()), e.detail());
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    print_error(kModule, "io", e.what());
    return 4;
  } catch (const std::exception& e) {
    print_error(kModule, "internal", e.what());
    return 3;
  }
  return 2;
}
