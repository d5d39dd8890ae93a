#include "pixeldoc/render.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

namespace {

bool is_space(char32_t c) { return c == U' ' || c == U'\t' || c == U'\r' || c == U'\n' || c == U'\f' || c == U'\v'; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::u32string> split_words(std::u32string_view text) {
  std::vector<std::u32string> words;
  std::u32string cur;
  for (char32_t c : text) {
    if (is_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::string> resolve_families(const std::vector<std::string>& wanted, const FontRegistry& fonts) {
  std::vector<std::string> fams = wanted.empty() ? fonts.families() : wanted;
  require(!fams.empty(), ErrorKind::FontResolution, "no font families available");
  for (const auto& f : fams) fonts.resolve(f);
  return fams;
}

FontSpec sample_font(const std::vector<std::string>& families, int min_size, int max_size, Rng& rng) {
  FontSpec f;
  f.family = families[uniform_int(rng, 0, static_cast<int>(families.size()) - 1)];
  f.size_px = uniform_int(rng, min_size, max_size);
  return f;
}

}  // namespace

ParagraphCorpus::ParagraphCorpus(std::vector<std::string> paragraphs, bool wrap) : wrap_(wrap) {
  for (auto& p : paragraphs) {
    std::string t = trim(p);
    if (!t.empty()) paragraphs_.push_back(std::move(t));
  }
}

ParagraphCorpus ParagraphCorpus::from_text(std::string_view text, bool wrap) {
  std::vector<std::string> paras;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      paras.emplace_back(text.substr(start));
      break;
    }
    paras.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return ParagraphCorpus(std::move(paras), wrap);
}

ParagraphCorpus ParagraphCorpus::from_file(const std::filesystem::path& path, bool wrap) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open corpus " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), wrap);
}

SpanPlan layout_block(std::string_view text, const FontSpec& font, int origin_y, int width, int height,
                      int margin, const FontRegistry& fonts, bool clip_last_line, std::vector<WordBox>& boxes,
                      bool& truncated, int& missing_glyphs) {
  const FontFace& face = fonts.resolve(font.family);
  require(font.size_px >= 8 && font.size_px <= std::max(8, height), ErrorKind::UsageError,
          "font size " + std::to_string(font.size_px) + " outside [8, canvas height]");
  const GlyphGeometry geom(face, font.size_px);
  const int lh = geom.line_height();
  const int glyph_dy = (lh - font.size_px) / 2;
  const int max_chars = std::max(1, static_cast<int>((width - 2 * margin) / geom.advance()));

  // greedy wrap; words longer than a line are cut into line-sized pieces
  std::vector<std::vector<std::u32string>> lines;
  std::vector<std::u32string> current;
  int current_len = 0;
  for (std::u32string word : split_words(decode_utf8(text))) {
    while (static_cast<int>(word.size()) > max_chars) {
      if (!current.empty()) {
        lines.push_back(std::move(current));
        current.clear();
        current_len = 0;
      }
      lines.push_back({word.substr(0, max_chars)});
      word = word.substr(max_chars);
    }
    if (word.empty()) continue;
    const int needed = current_len + (current.empty() ? 0 : 1) + static_cast<int>(word.size());
    if (needed > max_chars) {
      lines.push_back(std::move(current));
      current.clear();
      current_len = 0;
    }
    current_len += (current.empty() ? 0 : 1) + static_cast<int>(word.size());
    current.push_back(std::move(word));
  }
  if (!current.empty()) lines.push_back(std::move(current));

  SpanPlan span;
  span.font = font;
  span.origin_y = origin_y;
  const PixelBox canvas{0, 0, width, height};
  std::string placed_text;
  std::size_t k = 0;
  for (; k < lines.size(); ++k) {
    const int top = origin_y + static_cast<int>(k) * lh;
    const bool fits = clip_last_line ? top < height : top + lh <= height;
    if (!fits) break;
    PlacedLine pl{"", static_cast<double>(margin), top};
    double pen = margin;
    for (std::size_t w = 0; w < lines[k].size(); ++w) {
      const std::u32string& word = lines[k][w];
      if (w > 0) {
        pl.text += ' ';
        pen += geom.advance();
      }
      PixelBox box{};
      for (char32_t cp : word) {
        if (builtin_glyph(cp) == nullptr) ++missing_glyphs;
        for (const InkRect& r : geom.ink_rects(cp, pen, top + glyph_dy))
          box = box.unite(PixelBox{r.x0, r.y0, r.x1, r.y1});
        pen += geom.advance();
      }
      const std::string utf8 = encode_utf8(word);
      pl.text += utf8;
      box = box.intersect(canvas);
      if (!box.empty()) boxes.push_back({utf8, box});
    }
    if (!placed_text.empty()) placed_text += ' ';
    placed_text += pl.text;
    span.lines.push_back(std::move(pl));
  }
  if (k < lines.size()) truncated = true;
  span.text = std::move(placed_text);
  span.height = static_cast<int>(span.lines.size()) * lh;
  return span;
}

RenderPlan layout_paragraphs(const ParagraphCorpus& corpus, Rng& rng, const LayoutConfig& cfg,
                             const FontRegistry& fonts) {
  require(!corpus.empty(), ErrorKind::EmptyCorpus, "corpus holds no nonempty paragraph");
  require(cfg.min_font >= 8 && cfg.min_font <= cfg.max_font, ErrorKind::ConfigInvalid,
          "render font size range must satisfy 8 <= min <= max");
  const auto families = resolve_families(cfg.families, fonts);
  const std::size_t n = corpus.size();

  // random tail of paragraph p; the degenerate empty tail moves on to the next paragraph
  auto tail = [&](std::size_t& p) -> std::pair<std::string, std::size_t> {
    for (std::size_t attempt = 0; attempt < n; ++attempt, p = (p + 1) % n) {
      const std::string& para = corpus[p];
      std::size_t offset = 0;
      if (cfg.word_aligned_offset) {
        std::vector<std::size_t> starts;
        for (std::size_t i = 0; i < para.size(); ++i)
          if (!std::isspace(static_cast<unsigned char>(para[i])) &&
              (i == 0 || std::isspace(static_cast<unsigned char>(para[i - 1]))))
            starts.push_back(i);
        if (starts.empty()) continue;
        offset = starts[uniform_int(rng, 0, static_cast<int>(starts.size()) - 1)];
      } else {
        offset = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(para.size()) - 1));
        // keep whole UTF-8 sequences
        while (offset > 0 && (static_cast<unsigned char>(para[offset]) & 0xC0) == 0x80) --offset;
      }
      std::string t = trim(std::string_view(para).substr(offset));
      if (!t.empty()) return {t, offset};
    }
    fail(ErrorKind::EmptyCorpus, "no paragraph yields text");
  };

  RenderPlan plan;
  plan.width = cfg.width;
  plan.height = cfg.height;
  int cursor = 0;

  auto place = [&](const std::string& text, const FontSpec& font, std::size_t p, std::size_t offset, bool cont) {
    bool truncated = false;
    SpanPlan span = layout_block(text, font, cursor, cfg.width, cfg.height, cfg.margin, fonts, true,
                                 plan.word_boxes, truncated, plan.missing_glyphs);
    span.paragraph = p;
    span.offset = offset;
    span.continuation = cont;
    cursor += span.height;
    const bool placed = !span.lines.empty();
    if (placed) plan.spans.push_back(std::move(span));
    return placed;
  };
  auto empty_share = [&] { return std::max(0, cfg.height - cursor) / static_cast<double>(cfg.height); };

  std::size_t p = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n) - 1));
  FontSpec font = sample_font(families, cfg.min_font, cfg.max_font, rng);
  {
    auto [text, offset] = tail(p);
    place(text, font, p, offset, false);
  }
  while (empty_share() > cfg.empty_threshold) {
    if (bernoulli(rng, cfg.continue_prob)) {
      if (p + 1 >= n && !corpus.wraps()) break;  // corpus exhausted
      p = (p + 1) % n;
      if (!place(corpus[p], font, p, 0, true)) break;
    } else {
      font = sample_font(families, cfg.min_font, cfg.max_font, rng);
      p = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n) - 1));
      auto [text, offset] = tail(p);
      if (!place(text, font, p, offset, false)) break;
    }
  }
  return plan;
}

double empty_row_fraction(const RenderPlan& plan) {
  if (plan.height <= 0) return 0.0;
  std::vector<char> covered(plan.height, 0);
  for (const auto& s : plan.spans)
    for (int y = std::max(0, s.origin_y); y < std::min(plan.height, s.origin_y + s.height); ++y) covered[y] = 1;
  const auto filled = std::count(covered.begin(), covered.end(), 1);
  return static_cast<double>(plan.height - filled) / plan.height;
}

Scan rasterize(const RenderPlan& plan, const FontRegistry& fonts, const GlyphRasterizer& backend) {
  Scan scan;
  scan.pixels = Image(plan.height, plan.width, 1, 1.0F);
  for (const SpanPlan& span : plan.spans) {
    const GlyphGeometry geom(fonts.resolve(span.font.family), span.font.size_px);
    const int glyph_dy = (geom.line_height() - span.font.size_px) / 2;
    for (const PlacedLine& line : span.lines) {
      const std::u32string cps = decode_utf8(line.text);
      for (std::size_t i = 0; i < cps.size(); ++i) {
        if (is_space(cps[i])) continue;
        backend.draw(scan.pixels, geom, cps[i], line.x + static_cast<double>(i) * geom.advance(),
                     line.top + glyph_dy);
      }
    }
  }
  scan.truth = plan;
  return scan;
}

RenderedPair render_pair(std::string_view s1, const std::optional<std::string>& s2, bool noisy, Rng& rng,
                         const PairConfig& cfg, const FontRegistry& fonts, const GlyphRasterizer& backend) {
  require(!trim(s1).empty(), ErrorKind::UsageError, "render_pair: first sentence is empty");
  FontSpec font = cfg.clean_font;
  if (noisy) font = sample_font(resolve_families(cfg.families, fonts), cfg.min_font, cfg.max_font, rng);

  RenderPlan plan;
  plan.width = cfg.width;
  plan.height = cfg.height;
  for (;;) {
    plan.spans.clear();
    plan.word_boxes.clear();
    plan.truncated = false;
    plan.missing_glyphs = 0;
    SpanPlan first = layout_block(s1, font, 0, cfg.width, cfg.height, cfg.margin, fonts, false, plan.word_boxes,
                                  plan.truncated, plan.missing_glyphs);
    const int next_y = first.origin_y + first.height;
    plan.spans.push_back(std::move(first));
    if (s2 && !trim(*s2).empty()) {
      SpanPlan second = layout_block(*s2, font, next_y, cfg.width, cfg.height, cfg.margin, fonts, false,
                                     plan.word_boxes, plan.truncated, plan.missing_glyphs);
      second.paragraph = 1;
      plan.spans.push_back(std::move(second));
    }
    if (!plan.truncated || !noisy || font.size_px <= cfg.shrink_floor) break;
    --font.size_px;
  }

  RenderedPair out;
  out.truncated = plan.truncated;
  out.scan = rasterize(plan, fonts, backend);
  if (noisy) {
    Degraded d = degrade(out.scan, cfg.degrade, rng);
    out.scan = std::move(d.scan);
    out.transform = std::move(d.transform);
  }
  return out;
}

}  // namespace pixeldoc
