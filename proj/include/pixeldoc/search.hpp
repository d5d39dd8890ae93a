#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pixeldoc/model.hpp"

namespace pixeldoc {

/// Mean of the final-layer patch embeddings (no masking), L2-normalized.
std::vector<float> embed(const ModelParams<float>& params, const Image& scan);

struct Hit {
  std::string id;
  float cosine = 0.0F;

  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Exact cosine index over unit vectors.  Immutable once built; queries are
/// safe from many threads.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  explicit EmbeddingIndex(int width, std::string fingerprint = {});

  /// Normalizes `v`; throws UsageError on a duplicate id or zero vector and
  /// ShapeMismatch on a width mismatch.
  void add(std::string id, std::span<const float> v);

  int width() const { return width_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::string& fingerprint() const { return fingerprint_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> vector(std::size_t i) const;

  /// Top k by descending cosine, ties by ascending id.  Throws EmptyIndex on
  /// an empty index and UsageError when k exceeds the size.
  std::vector<Hit> query(std::span<const float> probe, std::size_t k) const;

  /// "PXIX" | version u32 | N u32 | width u32 | fingerprint (u32 length + bytes) |
  /// per entry id (u32 length + bytes) | N x width little-endian f32.
  void save(const std::filesystem::path& path) const;
  static EmbeddingIndex load(const std::filesystem::path& path);

 private:
  int width_ = 0;
  std::string fingerprint_;
  std::vector<std::string> ids_;
  std::unordered_set<std::string> id_set_;
  std::vector<float> data_;
};

}  // namespace pixeldoc
