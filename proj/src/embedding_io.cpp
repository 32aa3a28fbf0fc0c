#include "fakeidet/embedding_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "fakeidet/errors.hpp"

namespace fakeidet {

namespace {

constexpr const char* kModule = "embedding-io";
constexpr std::string_view kMagic = "FIDEMB1";

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::format, kModule, where + ": " + what);
}

bool valid_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == ' ' || c == '\t') return false;
  return true;
}

std::size_t parse_count(std::string_view token, std::string_view key, const std::string& where) {
  if (token.substr(0, key.size()) != key) fail(where, "expected '" + std::string(key) + "' in header");
  token.remove_prefix(key.size());
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) fail(where, "bad number in header field " + std::string(key));
  return v;
}

}  // namespace

void EmbeddingFile::add(std::string patch_id, std::span<const float> vec) {
  if (vec.size() != dim)
    throw Error(ErrorKind::format, kModule,
                "dimension mismatch for " + patch_id + ": got " + std::to_string(vec.size()) + ", file dim " +
                    std::to_string(dim));
  patch_ids.push_back(std::move(patch_id));
  values.insert(values.end(), vec.begin(), vec.end());
}

void EmbeddingFile::validate() const {
  if (dim == 0) throw Error(ErrorKind::format, kModule, "dimension must be positive");
  if (!valid_token(backbone_id)) throw Error(ErrorKind::format, kModule, "invalid backbone id '" + backbone_id + "'");
  if (values.size() != patch_ids.size() * dim)
    throw Error(ErrorKind::format, kModule, "value count does not match count x dim");
  std::unordered_set<std::string_view> seen;
  for (const auto& id : patch_ids) {
    if (!valid_token(id)) throw Error(ErrorKind::format, kModule, "invalid patch id '" + id + "'");
    if (!seen.insert(id).second) throw Error(ErrorKind::format, kModule, "duplicate patch_id " + id);
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw Error(ErrorKind::format, kModule, "non-finite value in record " + patch_ids[i / dim]);
}

void write_embeddings(const EmbeddingFile& file, std::ostream& out) {
  file.validate();
  out << kMagic << " backbone=" << file.backbone_id << " dim=" << file.dim << " count=" << file.count() << '\n';
  std::string line;
  char buf[32];
  for (std::size_t i = 0; i < file.count(); ++i) {
    line = file.patch_ids[i];
    for (float v : file.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      line += ',';
      line.append(buf, res.ptr);
    }
    line += '\n';
    out << line;
  }
}

void write_embeddings(const EmbeddingFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, kModule, "cannot write " + path.string());
  write_embeddings(file, out);
  out.flush();
  if (!out) throw Error(ErrorKind::io, kModule, "write failed for " + path.string());
}

EmbeddingFile read_embeddings(std::istream& in, const std::string& source_name) {
  std::string header;
  if (!std::getline(in, header)) fail(source_name, "empty file");
  std::istringstream hs(header);
  std::string magic, backbone, dim_tok, count_tok, extra;
  hs >> magic >> backbone >> dim_tok >> count_tok;
  if (magic != kMagic) fail(source_name, "missing FIDEMB1 header");
  if (backbone.rfind("backbone=", 0) != 0 || count_tok.empty() || (hs >> extra))
    fail(source_name, "malformed header '" + header + "'");

  EmbeddingFile file;
  file.backbone_id = backbone.substr(9);
  file.dim = parse_count(dim_tok, "dim=", source_name);
  const std::size_t declared = parse_count(count_tok, "count=", source_name);
  if (file.dim == 0) fail(source_name, "dimension must be positive");
  if (!valid_token(file.backbone_id)) fail(source_name, "invalid backbone id");

  std::unordered_set<std::string> seen;
  std::vector<float> vec(file.dim);
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source_name + ":" + std::to_string(line_no);
    if (line.empty()) {
      // Only a trailing newline is tolerated.
      if (in.peek() != std::char_traits<char>::eof()) fail(where, "empty record line");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(where, "record has no values");
    std::string id = line.substr(0, comma);
    if (!valid_token(id)) fail(where, "invalid patch id");
    if (!seen.insert(id).second) fail(where, "duplicate patch_id " + id);

    std::size_t n = 0;
    const char* p = line.data() + comma + 1;
    const char* end = line.data() + line.size();
    while (true) {
      const char* next = std::find(p, end, ',');
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(p, next, v);
      if (ec != std::errc{} || ptr != next) fail(where, "bad float in record " + id);
      if (!std::isfinite(v)) fail(where, "non-finite value in record " + id);
      if (n < file.dim) vec[n] = v;
      ++n;
      if (next == end) break;
      p = next + 1;
    }
    if (n != file.dim)
      fail(where, "dimension mismatch in record " + id + ": " + std::to_string(n) + " values, file dim " +
                      std::to_string(file.dim));
    file.patch_ids.push_back(std::move(id));
    file.values.insert(file.values.end(), vec.begin(), vec.end());
  }
  if (file.count() != declared)
    fail(source_name, "header declares " + std::to_string(declared) + " records but file has " +
                          std::to_string(file.count()));
  return file;
}

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kModule, "cannot open " + path.string());
  return read_embeddings(in, path.string());
}

}  // namespace fakeidet
