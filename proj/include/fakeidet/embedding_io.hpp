#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fakeidet/kernels.hpp"

namespace fakeidet {

// In-memory FIDEMB1 file: `count` rows of `dim` floats, row-major.
struct EmbeddingFile {
  std::string backbone_id;
  std::size_t dim = 0;
  std::vector<std::string> patch_ids;
  std::vector<float> values;

  std::size_t count() const noexcept { return patch_ids.size(); }
  std::span<const float> row(std::size_t i) const { return std::span<const float>(values).subspan(i * dim, dim); }
  kernels::FeatureView view() const { return {values, dim}; }

  void add(std::string patch_id, std::span<const float> vec);

  // Throws Error{format} on any broken invariant.
  void validate() const;
};

// Header line, then one line per record:
//   FIDEMB1 backbone=<id> dim=<d> count=<n>
//   <patch_id>,<v1>,...,<vd>
// Floats are written in shortest round-trip form.
void write_embeddings(const EmbeddingFile& file, std::ostream& out);
void write_embeddings(const EmbeddingFile& file, const std::filesystem::path& path);
EmbeddingFile read_embeddings(std::istream& in, const std::string& source_name = "<stream>");
EmbeddingFile read_embeddings(const std::filesystem::path& path);

}  // namespace fakeidet
