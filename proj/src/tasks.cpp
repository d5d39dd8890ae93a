#include "pixeldoc/tasks.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

#include <fmt/format.h>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

constexpr std::u32string_view kOcrAlphabet = U"abcdefghijklmnopqrstuvwxyz0123456789";

}  // namespace

OcrResult ocr_from_words(std::vector<WordBox> words) {
  OcrResult r;
  for (const auto& w : words) {
    if (!r.text.empty()) r.text += ' ';
    r.text += w.text;
  }
  r.words = std::move(words);
  return r;
}

OcrResult GroundTruthOcr::recognize(const Scan& scan) const {
  require(scan.truth.has_value(), ErrorKind::NoTruth, "scan '" + scan.meta.source_id + "' carries no word boxes");
  return ocr_from_words(scan.truth->word_boxes);
}

NoisyOcr::NoisyOcr(double p, std::uint64_t seed) : p_(p), seed_(seed) {
  require(p >= 0.0 && p <= 1.0, ErrorKind::ConfigInvalid, "ocr noise must lie in [0, 1]");
}

std::string NoisyOcr::name() const { return fmt::format("noisy:{}", p_); }

OcrResult NoisyOcr::recognize(const Scan& scan) const {
  OcrResult truth = GroundTruthOcr{}.recognize(scan);
  Rng rng = make_rng(seed_, "ocr", scan.meta.seed);
  std::vector<WordBox> words;
  const int n_alpha = static_cast<int>(kOcrAlphabet.size());
  for (auto& w : truth.words) {
    if (bernoulli(rng, p_ / 2.0)) continue;
    std::u32string cps = decode_utf8(w.text);
    for (char32_t& c : cps) {
      if (!bernoulli(rng, p_)) continue;
      char32_t sub = c;
      while (sub == c) sub = kOcrAlphabet[uniform_int(rng, 0, n_alpha - 1)];
      c = sub;
    }
    words.push_back({encode_utf8(cps), w.box});
  }
  return ocr_from_words(std::move(words));
}

std::unique_ptr<OcrEngine> make_ocr(std::string_view spec, std::uint64_t seed) {
  if (spec == "ground_truth") return std::make_unique<GroundTruthOcr>();
  if (spec == "noisy") return std::make_unique<NoisyOcr>(0.1, seed);
  if (spec.starts_with("noisy:")) {
    try {
      return std::make_unique<NoisyOcr>(std::stod(std::string(spec.substr(6))), seed);
    } catch (const std::logic_error&) {
    }
  }
  fail(ErrorKind::ConfigInvalid, "ocr: unknown engine '" + std::string(spec) + "'");
}

int edit_distance(std::u32string_view a, std::u32string_view b) {
  std::vector<int> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::optional<SpanMatch> fuzzy_locate(std::string_view answer, const OcrResult& ocr, double max_norm_dist) {
  require(!blank(answer), ErrorKind::UsageError, "fuzzy_locate: empty answer");
  const std::u32string a = decode_utf8(answer);
  const int m = static_cast<int>(a.size());
  std::vector<std::u32string> words;
  for (const auto& w : ocr.words) words.push_back(decode_utf8(w.text));

  std::optional<SpanMatch> best;
  std::vector<int> col(m + 1), next(m + 1);
  // extend the span one character at a time, carrying the DP column of
  // distances between prefixes of `a` and the span so far
  auto push = [&](char32_t ch) {
    next[0] = col[0] + 1;
    for (int k = 1; k <= m; ++k)
      next[k] = std::min({col[k] + 1, next[k - 1] + 1, col[k - 1] + (a[k - 1] == ch ? 0 : 1)});
    std::swap(col, next);
  };
  for (int i = 0; i < static_cast<int>(words.size()); ++i) {
    for (int k = 0; k <= m; ++k) col[k] = k;
    int len = 0;
    for (int j = i; j < static_cast<int>(words.size()); ++j) {
      if (j > i) {
        push(U' ');
        ++len;
      }
      for (char32_t ch : words[j]) push(ch);
      len += static_cast<int>(words[j].size());
      const int d = col[m];
      if (!best || d < best->distance) {
        best = SpanMatch{i, j, d, static_cast<double>(d) / std::max(m, len)};
      }
      // any longer span is at least len - m edits away
      if (len - m > best->distance) break;
    }
  }
  if (!best || best->normalized > max_norm_dist) return std::nullopt;
  return best;
}

int question_band_height(std::string_view question, const QaBuildConfig& cfg, const FontRegistry& fonts) {
  std::vector<WordBox> boxes;
  bool truncated = false;
  int missing = 0;
  const SpanPlan span = layout_block(question, cfg.question_font, 0, cfg.width, cfg.height, cfg.margin, fonts,
                                     false, boxes, truncated, missing);
  const int ps = cfg.patch_size;
  return (span.height + ps - 1) / ps * ps;
}

QAInstance build_qa_instance(std::string_view question, std::string_view context, std::string_view answer,
                             const QaBuildConfig& cfg, const OcrEngine& ocr, Rng& rng, const FontRegistry& fonts,
                             const GlyphRasterizer& backend) {
  require(!blank(answer), ErrorKind::UsageError, "build_qa_instance: answer must be nonempty");
  require(!blank(context), ErrorKind::UsageError, "build_qa_instance: context must be nonempty");
  require(!blank(question), ErrorKind::UsageError, "build_qa_instance: question must be nonempty");
  const PatchGrid grid = PatchGrid::for_image(cfg.height, cfg.width, cfg.patch_size);

  // question band, always clean
  RenderPlan qplan;
  qplan.width = cfg.width;
  qplan.height = cfg.height;
  qplan.spans.push_back(layout_block(question, cfg.question_font, 0, cfg.width, cfg.height, cfg.margin, fonts,
                                     false, qplan.word_boxes, qplan.truncated, qplan.missing_glyphs));
  const int band = (qplan.spans[0].height + cfg.patch_size - 1) / cfg.patch_size * cfg.patch_size;
  require(band > 0 && band < cfg.height, ErrorKind::UsageError,
          fmt::format("question band of {} px leaves no room on a {} px canvas", band, cfg.height));
  qplan.height = band;

  // context
  FontSpec font = cfg.context_font;
  if (cfg.noisy) {
    const auto fams = cfg.families.empty() ? fonts.families() : cfg.families;
    font.family = fams[uniform_int(rng, 0, static_cast<int>(fams.size()) - 1)];
    font.size_px = uniform_int(rng, cfg.min_font, cfg.max_font);
  }
  RenderPlan cplan;
  cplan.width = cfg.width;
  cplan.height = cfg.height;
  // only whole lines that stay visible below the question band are laid out
  cplan.spans.push_back(layout_block(context, font, 0, cfg.width, cfg.height - band, cfg.margin, fonts, false,
                                     cplan.word_boxes, cplan.truncated, cplan.missing_glyphs));
  Scan ctx = rasterize(cplan, fonts, backend);
  ctx.meta.seed = rng();

  QAInstance inst;
  inst.question = std::string(question);
  const OcrResult read = ocr.recognize(ctx);
  inst.match = fuzzy_locate(answer, read, cfg.max_norm_dist);
  PatchMask mask(grid);
  if (inst.match) {
    std::vector<PixelBox> boxes;
    for (int w = inst.match->first; w <= inst.match->last; ++w) boxes.push_back(read.words[w].box);
    mask = boxes_to_mask(boxes, grid);
  }
  if (cfg.noisy) {
    Degraded d = degrade(ctx, cfg.degrade, rng);
    mask = transport_mask(mask, d.transform, &*ctx.truth);
    inst.transform = d.transform;
    ctx.pixels = std::move(d.scan.pixels);
  }

  Scan qscan = rasterize(qplan, fonts, backend);
  Image stacked = vstack({qscan.pixels, ctx.pixels});
  inst.image.pixels = stacked.crop({0, 0, cfg.width, cfg.height}, 1.0F);
  inst.image.meta = ctx.meta;
  inst.question_rows = band / cfg.patch_size;
  inst.mask = mask.shifted_down(inst.question_rows);
  inst.has_answer = inst.mask.any();
  if (inst.has_answer) inst.answer = std::string(answer);

  if (!inst.transform.geometric()) {
    RenderPlan combined = qplan;
    combined.height = cfg.height;
    const PixelBox canvas{0, 0, cfg.width, cfg.height};
    for (const auto& w : cplan.word_boxes) {
      const PixelBox moved = PixelBox{w.box.x0, w.box.y0 + band, w.box.x1, w.box.y1 + band}.intersect(canvas);
      if (!moved.empty()) combined.word_boxes.push_back({w.text, moved});
    }
    for (auto span : cplan.spans) {
      span.origin_y += band;
      for (auto& l : span.lines) l.top += band;
      combined.spans.push_back(std::move(span));
    }
    combined.truncated = combined.truncated || cplan.truncated;
    inst.image.truth = std::move(combined);
  }
  return inst;
}

Example<float> qa_example(const QAInstance& inst) {
  Example<float> ex;
  const Image gray = inst.image.pixels.channels() == 1 ? inst.image.pixels : inst.image.pixels.to_gray();
  ex.patches = patchify<float>(gray, inst.mask.grid());
  ex.mask = inst.mask;
  ex.label = inst.has_answer ? 1 : 0;
  return ex;
}

PatchMask threshold_mask(std::span<const float> probs, const PatchGrid& grid, double threshold) {
  require(static_cast<int>(probs.size()) == grid.count(), ErrorKind::ShapeMismatch,
          fmt::format("{} probabilities for a grid of {} patches", probs.size(), grid.count()));
  PatchMask m(grid);
  for (int i = 0; i < grid.count(); ++i) m.set_flat(i, probs[i] > threshold);
  return m;
}

QAMetrics qa_metrics(const std::vector<std::vector<float>>& pred, const std::vector<PatchMask>& truth,
                     double threshold) {
  require(pred.size() == truth.size(), ErrorKind::LengthMismatch,
          fmt::format("{} predictions for {} instances", pred.size(), truth.size()));
  QAMetrics r;
  int agree = 0, overlap = 0;
  double iou = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const PatchMask predicted = threshold_mask(pred[i], truth[i].grid(), threshold);
    const bool has = truth[i].any();
    if (predicted.any() == has) ++agree;
    if (!has) {
      ++r.n_without;
      continue;
    }
    ++r.n_with_answer;
    const int inter = truth[i].intersection(predicted);
    iou += static_cast<double>(inter) / truth[i].union_count(predicted);
    if (inter >= 1) ++overlap;
  }
  if (!pred.empty()) r.binary_acc = static_cast<double>(agree) / pred.size();
  if (r.n_with_answer > 0) {
    r.patch_acc = iou / r.n_with_answer;
    r.one_overlap = static_cast<double>(overlap) / r.n_with_answer;
  }
  return r;
}

QAMetrics qa_metrics(const std::vector<std::vector<float>>& pred, const std::vector<QAInstance>& truth,
                     double threshold) {
  std::vector<PatchMask> masks;
  masks.reserve(truth.size());
  for (const auto& t : truth) masks.push_back(t.mask);
  return qa_metrics(pred, masks, threshold);
}

std::vector<std::size_t> balanced_indices(const std::vector<bool>& has_answer, Rng& rng) {
  std::vector<std::size_t> with, without;
  for (std::size_t i = 0; i < has_answer.size(); ++i) (has_answer[i] ? with : without).push_back(i);
  require(!with.empty() && !without.empty(), ErrorKind::OneClassOnly,
          fmt::format("cannot balance {} answerable and {} unanswerable instances", with.size(), without.size()));
  auto& major = with.size() > without.size() ? with : without;
  const std::size_t keep = std::min(with.size(), without.size());
  std::shuffle(major.begin(), major.end(), rng);
  major.resize(keep);
  std::vector<std::size_t> out = with;
  out.insert(out.end(), without.begin(), without.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<QAInstance> balance_test_set(std::vector<QAInstance> instances, Rng& rng) {
  std::vector<bool> flags;
  for (const auto& i : instances) flags.push_back(i.has_answer);
  std::vector<QAInstance> out;
  for (std::size_t i : balanced_indices(flags, rng)) out.push_back(std::move(instances[i]));
  return out;
}

namespace {

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "the",   "ship",  "sailed", "from",  "port",   "with",  "sugar", "and",   "rum",    "on",
      "board", "left",  "his",    "house", "near",   "river", "crew",  "came",  "back",   "late",
      "for",   "town",  "news",   "paper", "said",   "an",    "old",   "man",   "ran",    "away",
      "at",    "night", "cargo",  "sold",  "market", "road",  "field", "cane",  "harbor", "bay"};
  return words;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

QaText synth_qa_text(Rng& rng, const SyntheticQaConfig& cfg) {
  require(cfg.min_words >= 1 && cfg.min_words <= cfg.max_words, ErrorKind::ConfigInvalid,
          "synthetic qa: word count range must satisfy 1 <= min <= max");
  const auto& fillers = filler_words();
  std::vector<std::string> words;
  const int n = uniform_int(rng, cfg.min_words, cfg.max_words);
  for (int i = 0; i < n; ++i) words.push_back(fillers[uniform_int(rng, 0, static_cast<int>(fillers.size()) - 1)]);
  QaText t;
  t.question = "when?";
  t.answer = std::to_string(uniform_int(rng, 1700, 1899));
  t.answerable = bernoulli(rng, cfg.answerable_prob);
  if (t.answerable) words.insert(words.begin() + uniform_int(rng, 0, n), t.answer);
  t.context = join(words);
  return t;
}

std::vector<SeqExample> synth_seq_task(const std::vector<std::string>& vocab, int n, bool noisy, Rng& rng,
                                       const SeqTaskConfig& cfg, const FontRegistry& fonts,
                                       const GlyphRasterizer& backend) {
  require(vocab.size() >= 2, ErrorKind::UsageError, "synth_seq_task: vocabulary needs at least two words");
  require(cfg.min_words >= 1 && cfg.min_words <= cfg.max_words, ErrorKind::ConfigInvalid,
          "seq task: word count range must satisfy 1 <= min <= max");
  const std::string marker = cfg.marker.empty() ? vocab[0] : cfg.marker;
  std::vector<std::string> others;
  for (const auto& w : vocab)
    if (w != marker) others.push_back(w);
  require(!others.empty(), ErrorKind::UsageError, "synth_seq_task: vocabulary holds only the marker");
  auto sentence = [&] {
    std::vector<std::string> words;
    const int k = uniform_int(rng, cfg.min_words, cfg.max_words);
    for (int i = 0; i < k; ++i) words.push_back(others[uniform_int(rng, 0, static_cast<int>(others.size()) - 1)]);
    return words;
  };
  std::vector<SeqExample> out;
  for (int i = 0; i < n; ++i) {
    SeqExample ex;
    ex.s1 = join(sentence());
    std::vector<std::string> s2 = sentence();
    ex.label = bernoulli(rng, cfg.marker_prob) ? 1 : 0;
    if (ex.label == 1) s2.insert(s2.begin() + uniform_int(rng, 0, static_cast<int>(s2.size())), marker);
    ex.s2 = join(s2);
    const std::uint64_t seed = rng();
    Rng local(seed);
    RenderedPair r = render_pair(ex.s1, ex.s2, noisy, local, cfg.pair, fonts, backend);
    ex.scan = std::move(r.scan);
    ex.scan.meta.seed = seed;
    ex.truncated = r.truncated;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace pixeldoc
