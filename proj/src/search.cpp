#include "pixeldoc/search.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "pixeldoc/checkpoint.hpp"
#include "pixeldoc/errors.hpp"

namespace pixeldoc {

namespace {

constexpr std::uint32_t kIndexVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos, const std::string& where) {
  require(in.size() - pos >= 4, ErrorKind::Format, where + ": truncated index");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

std::string get_str(const std::string& in, std::size_t& pos, const std::string& where) {
  const std::uint32_t n = get_u32(in, pos, where);
  require(in.size() - pos >= n, ErrorKind::Format, where + ": truncated index");
  std::string s = in.substr(pos, n);
  pos += n;
  return s;
}

}  // namespace

std::vector<float> embed(const ModelParams<float>& params, const Image& scan) {
  const Image gray = scan.channels() == params.config.channels ? scan : scan.to_gray();
  const Mat<float> out = encode_all(params, patchify<float>(gray, params.config.grid()));
  const Eigen::VectorXd mean = out.cast<double>().colwise().mean().transpose();
  const double norm = mean.norm();
  std::vector<float> v(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) v[i] = static_cast<float>(norm > 0 ? mean[i] / norm : 0.0);
  return v;
}

EmbeddingIndex::EmbeddingIndex(int width, std::string fingerprint) : width_(width), fingerprint_(std::move(fingerprint)) {
  require(width > 0, ErrorKind::UsageError, "index width must be positive");
}

void EmbeddingIndex::add(std::string id, std::span<const float> v) {
  require(static_cast<int>(v.size()) == width_, ErrorKind::ShapeMismatch,
          fmt::format("vector of width {} for an index of width {}", v.size(), width_));
  require(id_set_.insert(id).second, ErrorKind::UsageError, "duplicate id " + id);
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  require(norm > 0.0 && std::isfinite(norm), ErrorKind::UsageError, "cannot index a zero or non-finite vector");
  for (float x : v) data_.push_back(static_cast<float>(x / norm));
  ids_.push_back(std::move(id));
}

std::span<const float> EmbeddingIndex::vector(std::size_t i) const {
  return {data_.data() + i * width_, static_cast<std::size_t>(width_)};
}

std::vector<Hit> EmbeddingIndex::query(std::span<const float> probe, std::size_t k) const {
  require(!empty(), ErrorKind::EmptyIndex, "query on an empty index");
  require(static_cast<int>(probe.size()) == width_, ErrorKind::ShapeMismatch,
          fmt::format("probe of width {} for an index of width {}", probe.size(), width_));
  require(k <= size(), ErrorKind::UsageError, fmt::format("k = {} exceeds index size {}", k, size()));
  double pn = 0.0;
  for (float x : probe) pn += static_cast<double>(x) * x;
  pn = std::sqrt(pn);
  std::vector<float> cos(size());
  for (std::size_t i = 0; i < size(); ++i) {
    double dot = 0.0;
    const float* row = data_.data() + i * width_;
    for (int d = 0; d < width_; ++d) dot += static_cast<double>(row[d]) * probe[d];
    cos[i] = static_cast<float>(pn > 0 ? dot / pn : 0.0);
  }
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    if (cos[a] != cos[b]) return cos[a] > cos[b];
    return ids_[a] < ids_[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < k; ++i) hits.push_back({ids_[order[i]], cos[order[i]]});
  return hits;
}

void EmbeddingIndex::save(const std::filesystem::path& path) const {
  std::string out = "PXIX";
  put_u32(out, kIndexVersion);
  put_u32(out, static_cast<std::uint32_t>(size()));
  put_u32(out, static_cast<std::uint32_t>(width_));
  put_u32(out, static_cast<std::uint32_t>(fingerprint_.size()));
  out += fingerprint_;
  for (const auto& id : ids_) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
  }
  for (float f : data_) put_u32(out, std::bit_cast<std::uint32_t>(f));
  write_file(path, out);
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  const std::string where = path.string();
  require(in.size() >= 4 && in.compare(0, 4, "PXIX") == 0, ErrorKind::Format, where + ": not a PXIX index");
  std::size_t pos = 4;
  const std::uint32_t version = get_u32(in, pos, where);
  require(version == kIndexVersion, ErrorKind::Format, where + ": unsupported index version " + std::to_string(version));
  const std::uint32_t n = get_u32(in, pos, where);
  const std::uint32_t width = get_u32(in, pos, where);
  require(width > 0, ErrorKind::Format, where + ": zero width");
  EmbeddingIndex idx(static_cast<int>(width), get_str(in, pos, where));
  for (std::uint32_t i = 0; i < n; ++i) {
    idx.ids_.push_back(get_str(in, pos, where));
    require(idx.id_set_.insert(idx.ids_.back()).second, ErrorKind::Format, where + ": duplicate id " + idx.ids_.back());
  }
  require(in.size() - pos == static_cast<std::size_t>(n) * width * 4, ErrorKind::Format,
          where + ": vector block has the wrong length");
  idx.data_.resize(static_cast<std::size_t>(n) * width);
  for (float& f : idx.data_) f = std::bit_cast<float>(get_u32(in, pos, where));
  return idx;
}

}  // namespace pixeldoc
