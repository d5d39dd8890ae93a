#include "pixeldoc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

using Json = nlohmann::json;

Json model_config_to_json(const ModelConfig& c) {
  return Json{{"patch_size", c.patch_size}, {"image_hw", c.image_hw},     {"channels", c.channels},
              {"enc_layers", c.enc_layers}, {"dec_layers", c.dec_layers}, {"width", c.width},
              {"heads", c.heads},           {"mlp_ratio", c.mlp_ratio},   {"norm_pix", c.norm_pix},
              {"dropout", c.dropout},       {"seq_classes", c.seq_classes}, {"patch_head", c.patch_head}};
}

ModelConfig model_config_from_json(const Json& j, const std::string& where, ModelConfig c) {
  require(j.is_object(), ErrorKind::ConfigInvalid, where + ": expected an object");
  for (const auto& [key, v] : j.items()) {
    const std::string path = where + "." + key;
    try {
      if (key == "patch_size") c.patch_size = v.get<int>();
      else if (key == "image_hw") c.image_hw = v.get<int>();
      else if (key == "channels") c.channels = v.get<int>();
      else if (key == "enc_layers") c.enc_layers = v.get<int>();
      else if (key == "dec_layers") c.dec_layers = v.get<int>();
      else if (key == "width") c.width = v.get<int>();
      else if (key == "heads") c.heads = v.get<int>();
      else if (key == "mlp_ratio") c.mlp_ratio = v.get<int>();
      else if (key == "norm_pix") c.norm_pix = v.get<bool>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "seq_classes") c.seq_classes = v.get<int>();
      else if (key == "patch_head") c.patch_head = v.get<bool>();
      else fail(ErrorKind::ConfigInvalid, path + ": unknown key");
    } catch (const Json::exception& e) {
      fail(ErrorKind::ConfigInvalid, path + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

namespace {

constexpr char kMagic[4] = {'P', 'X', 'D', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  Reader(const std::string& bytes, std::string where) : bytes_(bytes), where_(std::move(where)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void bad(const std::string& msg) const { fail(ErrorKind::Format, where_ + ": " + msg); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) bad("truncated at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelParams<float>& params) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::string cfg = model_config_to_json(params.config).dump();
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  std::uint32_t count = 0;
  params.for_each([&](const std::string&, const Mat<float>&) { ++count; });
  put_u32(out, count);
  params.for_each([&](const std::string& name, const Mat<float>& m) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_f32(out, m.data()[i]);
  });
  return out;
}

ModelParams<float> deserialize_checkpoint(const std::string& bytes, const std::string& where) {
  Reader r(bytes, where);
  if (r.raw(4) != std::string(kMagic, 4)) r.bad("not a PXDC checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.bad("unsupported version " + std::to_string(version));
  Json cfg_json;
  try {
    cfg_json = Json::parse(r.str());
  } catch (const Json::exception& e) {
    r.bad(std::string("config blob: ") + e.what());
  }
  const ModelConfig cfg = model_config_from_json(cfg_json, where + ".config");
  ModelParams<float> params = ModelParams<float>::init(cfg, 0);
  const std::uint32_t count = r.u32();
  std::uint32_t seen = 0;
  params.for_each([&](const std::string& name, Mat<float>& m) {
    if (seen++ >= count) r.bad("missing tensor " + name);
    const std::string got = r.str();
    if (got != name) r.bad("expected tensor " + name + ", found " + got);
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (rows != m.rows() || cols != m.cols())
      fail(ErrorKind::ShapeMismatch, fmt::format("{}: tensor {} is {}x{}, config implies {}x{}", where, name, rows,
                                                 cols, m.rows(), m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
  });
  if (seen != count || !r.done()) r.bad("trailing data after tensors");
  require(params.all_finite(), ErrorKind::Format, where + ": non-finite weights");
  return params;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::Io, "short write to " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params) {
  write_file(path, serialize_checkpoint(params));
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path), path.string());
}

std::string fingerprint(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string file_fingerprint(const std::filesystem::path& path) { return fingerprint(read_file(path)); }

}  // namespace pixeldoc
