#include "pixeldoc/config.hpp"

#include "pixeldoc/checkpoint.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/manifest.hpp"
#include "pixeldoc/train.hpp"

namespace pixeldoc {

LayoutConfig RunConfig::desk_layout() {
  LayoutConfig l;
  l.width = 64;
  l.height = 64;
  l.max_font = 16;
  return l;
}

namespace {

void check(bool ok, const std::string& what) { require(ok, ErrorKind::ConfigInvalid, what); }

const char* type_name(const Json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number_float()) return "number";
  if (j.is_number()) return "integer";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return a.is_number_float() || !b.is_number_float();
  return std::string(type_name(a)) == type_name(b);
}

// typed field access with the failing key path in the message
class Section {
 public:
  Section(const Json& j, std::string where) : j_(j), where_(std::move(where)) {}

  template <typename T>
  void get(const char* key, T& out) const {
    const std::string path = where_.empty() ? key : where_ + "." + key;
    check(j_.contains(key), path + ": missing");
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      fail(ErrorKind::ConfigInvalid, path + ": expected " + type_name(Json(out)) + ", got " + type_name(j_.at(key)));
    }
  }
  Section sub(const char* key) const {
    const std::string path = where_.empty() ? key : where_ + "." + key;
    check(j_.contains(key) && j_.at(key).is_object(), path + ": expected an object");
    return {j_.at(key), path};
  }
  const Json& raw(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

 private:
  const Json& j_;
  std::string where_;
};

}  // namespace

Json to_json(const RunConfig& c) {
  Json paths{{"corpus", c.paths.corpus},         {"output", c.paths.output},   {"checkpoint", c.paths.checkpoint},
             {"manifest", c.paths.manifest},     {"scans", c.paths.scans},     {"pages", c.paths.pages},
             {"index", c.paths.index},           {"probe", c.paths.probe},     {"predictions", c.paths.predictions}};
  Json render{{"width", c.render.width},
              {"height", c.render.height},
              {"margin", c.render.margin},
              {"empty_threshold", c.render.empty_threshold},
              {"continue_prob", c.render.continue_prob},
              {"min_font", c.render.min_font},
              {"max_font", c.render.max_font},
              {"families", c.render.families},
              {"word_aligned_offset", c.render.word_aligned_offset}};
  Json mask{{"ratio", c.mask.ratio},         {"min_width", c.mask.min_width}, {"max_width", c.mask.max_width},
            {"min_height", c.mask.min_height}, {"max_height", c.mask.max_height}, {"trim", c.mask.trim}};
  Json optim{{"lr", c.optim.lr},       {"min_lr", c.optim.min_lr},           {"warmup", c.optim.warmup},
             {"steps", c.optim.steps}, {"batch", c.optim.batch},             {"weight_decay", c.optim.weight_decay},
             {"beta1", c.optim.beta1}, {"beta2", c.optim.beta2},             {"eps", c.optim.eps}};
  Json corpus{{"window", c.corpus.window},
              {"stride", c.corpus.stride},
              {"target_width", c.corpus.target_width},
              {"val_fraction", c.corpus.val_fraction},
              {"anchor_bottom", c.corpus.anchor_bottom},
              {"min_gutter", c.corpus.min_gutter}};
  Json synth{{"n", c.synth.n}, {"degrade", c.synth.degrade}, {"val_fraction", c.synth.val_fraction}};
  Json pretrain{{"fixed_masks", c.pretrain.fixed_masks}};
  Json qa{{"n", c.qa.n},
          {"noisy", c.qa.noisy},
          {"ocr", c.qa.ocr},
          {"max_norm_dist", c.qa.max_norm_dist},
          {"threshold", c.qa.threshold},
          {"balance", c.qa.balance},
          {"min_words", c.qa.min_words},
          {"max_words", c.qa.max_words},
          {"answerable_prob", c.qa.answerable_prob},
          {"min_font", c.qa.min_font},
          {"max_font", c.qa.max_font},
          {"val_fraction", c.qa.val_fraction}};
  Json seq{{"n", c.seq.n},
           {"noisy", c.seq.noisy},
           {"marker", c.seq.marker},
           {"marker_prob", c.seq.marker_prob},
           {"min_words", c.seq.min_words},
           {"max_words", c.seq.max_words},
           {"val_fraction", c.seq.val_fraction}};
  Json degrade;
  to_json(degrade, c.degrade);
  return Json{{"seed", c.seed},     {"paths", paths},   {"model", model_config_to_json(c.model)},
              {"render", render},   {"backend", c.backend}, {"degrade", degrade},
              {"mask", mask},       {"optim", optim},   {"corpus", corpus},
              {"synth", synth},     {"pretrain", pretrain}, {"qa", qa},
              {"seq", seq},         {"k", c.k}};
}

RunConfig run_config_from_json(const Json& j) {
  check(j.is_object(), "config: expected an object");
  Json full = to_json(RunConfig{});
  merge_config(full, j);

  RunConfig c;
  const Section root(full, "");
  root.get("seed", c.seed);
  root.get("backend", c.backend);
  root.get("k", c.k);
  const Section p = root.sub("paths");
  p.get("corpus", c.paths.corpus);
  p.get("output", c.paths.output);
  p.get("checkpoint", c.paths.checkpoint);
  p.get("manifest", c.paths.manifest);
  p.get("scans", c.paths.scans);
  p.get("pages", c.paths.pages);
  p.get("index", c.paths.index);
  p.get("probe", c.paths.probe);
  p.get("predictions", c.paths.predictions);
  c.model = model_config_from_json(full.at("model"), "model");
  const Section r = root.sub("render");
  r.get("width", c.render.width);
  r.get("height", c.render.height);
  r.get("margin", c.render.margin);
  r.get("empty_threshold", c.render.empty_threshold);
  r.get("continue_prob", c.render.continue_prob);
  r.get("min_font", c.render.min_font);
  r.get("max_font", c.render.max_font);
  r.get("families", c.render.families);
  r.get("word_aligned_offset", c.render.word_aligned_offset);
  c.degrade = degradation_from_json(full.at("degrade"), "degrade");
  const Section m = root.sub("mask");
  m.get("ratio", c.mask.ratio);
  m.get("min_width", c.mask.min_width);
  m.get("max_width", c.mask.max_width);
  m.get("min_height", c.mask.min_height);
  m.get("max_height", c.mask.max_height);
  m.get("trim", c.mask.trim);
  const Section o = root.sub("optim");
  o.get("lr", c.optim.lr);
  o.get("min_lr", c.optim.min_lr);
  o.get("warmup", c.optim.warmup);
  o.get("steps", c.optim.steps);
  o.get("batch", c.optim.batch);
  o.get("weight_decay", c.optim.weight_decay);
  o.get("beta1", c.optim.beta1);
  o.get("beta2", c.optim.beta2);
  o.get("eps", c.optim.eps);
  const Section co = root.sub("corpus");
  co.get("window", c.corpus.window);
  co.get("stride", c.corpus.stride);
  co.get("target_width", c.corpus.target_width);
  co.get("val_fraction", c.corpus.val_fraction);
  co.get("anchor_bottom", c.corpus.anchor_bottom);
  co.get("min_gutter", c.corpus.min_gutter);
  const Section s = root.sub("synth");
  s.get("n", c.synth.n);
  s.get("degrade", c.synth.degrade);
  s.get("val_fraction", c.synth.val_fraction);
  root.sub("pretrain").get("fixed_masks", c.pretrain.fixed_masks);
  const Section q = root.sub("qa");
  q.get("n", c.qa.n);
  q.get("noisy", c.qa.noisy);
  q.get("ocr", c.qa.ocr);
  q.get("max_norm_dist", c.qa.max_norm_dist);
  q.get("threshold", c.qa.threshold);
  q.get("balance", c.qa.balance);
  q.get("min_words", c.qa.min_words);
  q.get("max_words", c.qa.max_words);
  q.get("answerable_prob", c.qa.answerable_prob);
  q.get("min_font", c.qa.min_font);
  q.get("max_font", c.qa.max_font);
  q.get("val_fraction", c.qa.val_fraction);
  const Section sq = root.sub("seq");
  sq.get("n", c.seq.n);
  sq.get("noisy", c.seq.noisy);
  sq.get("marker", c.seq.marker);
  sq.get("marker_prob", c.seq.marker_prob);
  sq.get("min_words", c.seq.min_words);
  sq.get("max_words", c.seq.max_words);
  sq.get("val_fraction", c.seq.val_fraction);
  c.validate();
  return c;
}

void RunConfig::validate() const {
  model.validate();
  degrade.validate();
  check(backend == "bitmap" || backend == "outline", "backend: expected \"bitmap\" or \"outline\"");
  check(render.width > 2 * render.margin && render.height > 0, "render: canvas too small for its margin");
  check(render.min_font >= 8 && render.min_font <= render.max_font && render.max_font <= render.height,
        "render: font range must satisfy 8 <= min_font <= max_font <= height");
  check(render.empty_threshold >= 0.0 && render.empty_threshold < 1.0, "render.empty_threshold: must lie in [0, 1)");
  check(render.continue_prob >= 0.0 && render.continue_prob <= 1.0, "render.continue_prob: must lie in [0, 1]");
  check(mask.ratio > 0.0 && mask.ratio < 1.0, "mask.ratio: must lie in (0, 1)");
  check(mask.min_width >= 1 && mask.min_width <= mask.max_width, "mask: width range must satisfy 1 <= min <= max");
  check(mask.min_height >= 1 && mask.min_height <= mask.max_height, "mask: height range must satisfy 1 <= min <= max");
  Schedule{optim.lr, optim.min_lr, optim.warmup, optim.steps}.validate();
  check(optim.batch >= 1, "optim.batch: must be positive");
  check(optim.weight_decay >= 0.0, "optim.weight_decay: must be non-negative");
  check(optim.beta1 >= 0.0 && optim.beta1 < 1.0 && optim.beta2 >= 0.0 && optim.beta2 < 1.0,
        "optim.beta1/beta2: must lie in [0, 1)");
  check(optim.eps > 0.0, "optim.eps: must be positive");
  check(corpus.window > 0 && corpus.stride > 0 && corpus.target_width > 0, "corpus: window, stride and width must be positive");
  check(corpus.val_fraction >= 0.0 && corpus.val_fraction < 1.0, "corpus.val_fraction: must lie in [0, 1)");
  check(synth.n >= 0, "synth.n: must be non-negative");
  check(synth.val_fraction >= 0.0 && synth.val_fraction < 1.0, "synth.val_fraction: must lie in [0, 1)");
  check(qa.n >= 0 && seq.n >= 0, "qa.n / seq.n: must be non-negative");
  check(qa.max_norm_dist >= 0.0, "qa.max_norm_dist: must be non-negative");
  check(qa.threshold > 0.0 && qa.threshold < 1.0, "qa.threshold: must lie in (0, 1)");
  check(qa.min_words >= 1 && qa.min_words <= qa.max_words, "qa: word range must satisfy 1 <= min <= max");
  check(qa.min_font >= 8 && qa.min_font <= qa.max_font, "qa: font range must satisfy 8 <= min <= max");
  check(qa.answerable_prob >= 0.0 && qa.answerable_prob <= 1.0, "qa.answerable_prob: must lie in [0, 1]");
  check(seq.min_words >= 1 && seq.min_words <= seq.max_words, "seq: word range must satisfy 1 <= min <= max");
  check(qa.val_fraction >= 0.0 && qa.val_fraction < 1.0 && seq.val_fraction >= 0.0 && seq.val_fraction < 1.0,
        "qa.val_fraction / seq.val_fraction: must lie in [0, 1)");
  check(seq.marker_prob >= 0.0 && seq.marker_prob <= 1.0, "seq.marker_prob: must lie in [0, 1]");
  check(k >= 1, "k: must be positive");
}

void merge_config(Json& base, const Json& patch, const std::string& where) {
  check(patch.is_object(), (where.empty() ? std::string("config") : where) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    check(base.contains(key), path + ": unknown key");
    Json& target = base[key];
    if (target.is_object() && value.is_object()) {
      merge_config(target, value, path);
      continue;
    }
    check(same_kind(target, value), path + ": expected " + type_name(target) + ", got " + type_name(value));
    target = value;
  }
}

void set_config_value(Json& tree, const std::string& dotted_key, const std::string& text) {
  Json* node = &tree;
  std::size_t start = 0;
  std::string path;
  for (;;) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    path += (path.empty() ? "" : ".") + part;
    check(node->is_object() && node->contains(part), path + ": unknown key");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_string()) {
    *node = text;
    return;
  }
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::exception&) {
    fail(ErrorKind::ConfigInvalid, path + ": cannot parse '" + text + "' as " + type_name(*node));
  }
  check(same_kind(*node, value), path + ": expected " + std::string(type_name(*node)) + ", got " + type_name(value));
  *node = value;
}

}  // namespace pixeldoc
