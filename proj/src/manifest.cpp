#include "pixeldoc/manifest.hpp"

#include <fstream>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

void to_json(Json& j, const WordBox& b) {
  j = Json{{"text", b.text}, {"x0", b.box.x0}, {"y0", b.box.y0}, {"x1", b.box.x1}, {"y1", b.box.y1}};
}

void from_json(const Json& j, WordBox& b) {
  b.text = j.at("text").get<std::string>();
  b.box = {j.at("x0").get<int>(), j.at("y0").get<int>(), j.at("x1").get<int>(), j.at("y1").get<int>()};
}

void to_json(Json& j, const RenderPlan& p) {
  Json spans = Json::array();
  for (const auto& s : p.spans)
    spans.push_back({{"font", s.font.family},
                     {"size", s.font.size_px},
                     {"offset", s.offset},
                     {"paragraph", s.paragraph},
                     {"origin_y", s.origin_y},
                     {"height", s.height},
                     {"continuation", s.continuation},
                     {"text", s.text}});
  j = Json{{"width", p.width},       {"height", p.height},       {"spans", spans},
           {"word_boxes", p.word_boxes}, {"truncated", p.truncated}, {"missing_glyphs", p.missing_glyphs}};
}

void from_json(const Json& j, RenderPlan& p) {
  p.width = j.value("width", 0);
  p.height = j.value("height", 0);
  p.truncated = j.value("truncated", false);
  p.missing_glyphs = j.value("missing_glyphs", 0);
  p.word_boxes = j.at("word_boxes").get<std::vector<WordBox>>();
  p.spans.clear();
  for (const auto& s : j.value("spans", Json::array())) {
    SpanPlan span;
    span.font = {s.at("font").get<std::string>(), s.at("size").get<int>()};
    span.offset = s.value("offset", std::size_t{0});
    span.paragraph = s.value("paragraph", std::size_t{0});
    span.origin_y = s.value("origin_y", 0);
    span.height = s.value("height", 0);
    span.continuation = s.value("continuation", false);
    span.text = s.value("text", std::string{});
    p.spans.push_back(std::move(span));
  }
}

void to_json(Json& j, const AppliedTransform& t) {
  Json effects = Json::array();
  for (const auto& e : t.effects) effects.push_back({{"name", e.name}, {"params", e.params}});
  j = Json{{"rotation_deg", t.rotation_deg}, {"effects", effects}};
}

void from_json(const Json& j, AppliedTransform& t) {
  t.rotation_deg = j.value("rotation_deg", 0.0);
  t.effects.clear();
  for (const auto& e : j.value("effects", Json::array()))
    t.effects.push_back({e.at("name").get<std::string>(), e.at("params").get<std::vector<double>>()});
}

void to_json(Json& j, const EffectConfig& e) {
  j = Json{{"enabled", e.enabled}, {"prob", e.prob}, {"range", {e.lo, e.hi}}};
}

void to_json(Json& j, const DegradationConfig& c) {
  j = Json{{"bleed", c.bleed},   {"salt_pepper", c.salt_pepper}, {"blur", c.blur},   {"rotation", c.rotation},
           {"lines", c.lines},   {"stains", c.stains},           {"holes", c.holes}, {"bg_jitter", c.bg_jitter}};
}

DegradationConfig degradation_from_json(const Json& j, const std::string& where, DegradationConfig base) {
  require(j.is_object(), ErrorKind::ConfigInvalid, where + ": expected an object");
  std::pair<const char*, EffectConfig*> fields[] = {
      {"bleed", &base.bleed}, {"salt_pepper", &base.salt_pepper}, {"blur", &base.blur},
      {"rotation", &base.rotation}, {"lines", &base.lines}, {"stains", &base.stains},
      {"holes", &base.holes}, {"bg_jitter", &base.bg_jitter}};
  for (const auto& [key, value] : j.items()) {
    EffectConfig* target = nullptr;
    for (auto& [name, e] : fields)
      if (key == name) target = e;
    const std::string path = where + "." + key;
    require(target != nullptr, ErrorKind::ConfigInvalid, path + ": unknown key");
    require(value.is_object(), ErrorKind::ConfigInvalid, path + ": expected an object");
    try {
      for (const auto& [k, v] : value.items()) {
        if (k == "enabled") {
          target->enabled = v.get<bool>();
        } else if (k == "prob") {
          target->prob = v.get<double>();
        } else if (k == "range") {
          const auto r = v.get<std::vector<double>>();
          require(r.size() == 2, ErrorKind::ConfigInvalid, path + ".range: expected [low, high]");
          target->lo = r[0];
          target->hi = r[1];
        } else {
          fail(ErrorKind::ConfigInvalid, path + "." + k + ": unknown key");
        }
      }
    } catch (const Json::exception& e) {
      fail(ErrorKind::ConfigInvalid, path + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

void to_json(Json& j, const ManifestEntry& e) {
  j = Json{{"path", e.path}, {"source", e.source}, {"crop_offset", e.crop_offset}, {"split", e.split}, {"seed", e.seed}};
  if (e.truth) {
    const Json plan = *e.truth;
    j["word_boxes"] = plan["word_boxes"];
    j["spans"] = plan["spans"];
    j["canvas"] = {plan["width"], plan["height"]};
  }
  if (e.transform) j["transform"] = *e.transform;
}

void from_json(const Json& j, ManifestEntry& e) {
  e.path = j.at("path").get<std::string>();
  e.source = j.value("source", std::string{});
  e.crop_offset = j.value("crop_offset", 0);
  e.split = j.value("split", std::string{"train"});
  e.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("word_boxes")) {
    Json plan{{"word_boxes", j["word_boxes"]}, {"spans", j.value("spans", Json::array())}};
    if (j.contains("canvas")) {
      plan["width"] = j["canvas"][0];
      plan["height"] = j["canvas"][1];
    }
    e.truth = plan.get<RenderPlan>();
  }
  if (j.contains("transform")) e.transform = j["transform"].get<AppliedTransform>();
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  std::vector<Json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  for (const auto& l : lines) out << l.dump() << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  DatasetManifest m;
  try {
    for (const auto& j : read_jsonl(path)) m.entries.push_back(j.get<ManifestEntry>());
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::vector<Json> lines;
  for (const auto& e : manifest.entries) lines.emplace_back(e);
  write_jsonl(path, lines);
}

}  // namespace pixeldoc
