#include <doctest.h>

#include <algorithm>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "pixeldoc/errors.hpp"
#include "pixeldoc/tasks.hpp"

using namespace pixeldoc;

namespace {

const FontRegistry& registry() {
  static const FontRegistry r = FontRegistry::builtin();
  return r;
}

const GlyphRasterizer& bitmap() {
  static const auto b = make_rasterizer("bitmap");
  return *b;
}

// Plain recursive definition with memoization.
int slow_distance(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> int {
    if (i == 0) return static_cast<int>(j);
    if (j == 0) return static_cast<int>(i);
    int& m = memo[i][j];
    if (m >= 0) return m;
    m = std::min({d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return m;
  };
  return d(a.size(), b.size());
}

std::u32string random_word(Rng& rng, int max_len, const std::u32string& alphabet = U"abcde") {
  std::u32string s;
  const int n = uniform_int(rng, 1, max_len);
  for (int i = 0; i < n; ++i) s += alphabet[uniform_int(rng, 0, static_cast<int>(alphabet.size()) - 1)];
  return s;
}

OcrResult words_result(const std::vector<std::string>& words) {
  std::vector<WordBox> boxes;
  for (std::size_t i = 0; i < words.size(); ++i) boxes.push_back({words[i], {int(i) * 10, 0, int(i) * 10 + 8, 8}});
  return ocr_from_words(boxes);
}

// Every contiguous span, minimum distance, then leftmost, then shortest.
std::optional<SpanMatch> brute_locate(const std::string& answer, const std::vector<std::string>& words, double max_nd) {
  const std::u32string a = decode_utf8(answer);
  std::optional<SpanMatch> best;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string text;
    for (std::size_t j = i; j < words.size(); ++j) {
      text += (j > i ? " " : "") + words[j];
      const std::u32string t = decode_utf8(text);
      const int d = slow_distance(a, t);
      if (!best || d < best->distance)
        best = SpanMatch{int(i), int(j), d, double(d) / double(std::max(a.size(), t.size()))};
    }
  }
  if (best && best->normalized > max_nd) return std::nullopt;
  return best;
}

Scan scan_with_words(const std::vector<std::string>& words, std::uint64_t seed) {
  Scan s;
  s.pixels = Image(16, 16);
  s.meta.seed = seed;
  RenderPlan p;
  for (std::size_t i = 0; i < words.size(); ++i) p.word_boxes.push_back({words[i], {0, 0, 1, 1}});
  s.truth = p;
  return s;
}

}  // namespace

TEST_CASE("edit distance agrees with the recursive definition") {
  Rng rng(1);
  for (int t = 0; t < 400; ++t) {
    const std::u32string a = random_word(rng, 8), b = random_word(rng, 8);
    const int d = edit_distance(a, b);
    CHECK(d == slow_distance(a, b));
    CHECK(d == edit_distance(b, a));
    const std::u32string c = random_word(rng, 8);
    CHECK(edit_distance(a, c) <= d + edit_distance(b, c));
  }
  CHECK(edit_distance(U"", U"abc") == 3);
  CHECK(edit_distance(U"kitten", U"sitting") == 3);
}

TEST_CASE("fuzzy_locate agrees with exhaustive span search") {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::string> words;
    const int n = uniform_int(rng, 1, 6);
    for (int i = 0; i < n; ++i) words.push_back(encode_utf8(random_word(rng, 4, U"abc")));
    std::string answer = encode_utf8(random_word(rng, 6, U"abc"));
    if (t % 3 == 0) {
      const int i = uniform_int(rng, 0, n - 1);
      answer = words[i];
    }
    const auto got = fuzzy_locate(answer, words_result(words), 0.5);
    const auto want = brute_locate(answer, words, 0.5);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(got->first == want->first);
      CHECK(got->last == want->last);
      CHECK(got->distance == want->distance);
      CHECK(got->normalized == doctest::Approx(want->normalized));
    }
  }
}

TEST_CASE("fuzzy_locate examples") {
  const OcrResult r = words_result({"the", "ship", "sailed", "in", "1795", "from", "port"});
  auto m = fuzzy_locate("1795", r);
  REQUIRE(m);
  CHECK(m->first == 4);
  CHECK(m->last == 4);
  CHECK(m->distance == 0);
  m = fuzzy_locate("1785", r);
  REQUIRE(m);
  CHECK(m->first == 4);
  CHECK(m->normalized == doctest::Approx(0.25));
  m = fuzzy_locate("sailed in", r);
  REQUIRE(m);
  CHECK(m->first == 2);
  CHECK(m->last == 3);
  CHECK_FALSE(fuzzy_locate("zzzzzzzz", r).has_value());
  CHECK_THROWS_AS(fuzzy_locate("", r), Error);
  CHECK_FALSE(fuzzy_locate("abc", words_result({})).has_value());
}

TEST_CASE("ground truth ocr") {
  const OcrResult r = GroundTruthOcr{}.recognize(scan_with_words({"a", "bb", "ccc"}, 1));
  CHECK(r.text == "a bb ccc");
  CHECK(r.words.size() == 3);
  Scan bare;
  bare.pixels = Image(16, 16);
  try {
    GroundTruthOcr{}.recognize(bare);
    FAIL("expected NoTruth");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoTruth);
  }
}

TEST_CASE("noisy ocr rates and determinism") {
  std::vector<std::string> words(4000, "abcdefgh");
  const Scan s = scan_with_words(words, 7);
  const NoisyOcr ocr(0.1, 3);
  const OcrResult a = ocr.recognize(s), b = ocr.recognize(s);
  CHECK(a.text == b.text);
  const double kept = static_cast<double>(a.words.size()) / words.size();
  CHECK(kept == doctest::Approx(0.95).epsilon(0.02));
  int changed = 0, total = 0;
  for (const auto& w : a.words) {
    REQUIRE(w.text.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) changed += w.text[i] != words[0][i] ? 1 : 0;
    total += 8;
  }
  CHECK(static_cast<double>(changed) / total == doctest::Approx(0.1).epsilon(0.1));
  CHECK(NoisyOcr(0.0, 3).recognize(s).text == GroundTruthOcr{}.recognize(s).text);
  CHECK_FALSE(NoisyOcr(0.1, 4).recognize(s).text == a.text);
  CHECK(make_ocr("noisy:0.2")->name() == NoisyOcr(0.2).name());
  CHECK(make_ocr("ground_truth")->name() == "ground_truth");
  CHECK_THROWS_AS(make_ocr("tesseract"), Error);
  CHECK_THROWS_AS(make_ocr("noisy:x"), Error);
}

TEST_CASE("synthetic qa text") {
  Rng rng(4);
  int answerable = 0;
  for (int i = 0; i < 400; ++i) {
    const QaText t = synth_qa_text(rng);
    CHECK(t.answer.size() == 4);
    const bool present = t.context.find(t.answer) != std::string::npos;
    CHECK(present == t.answerable);
    answerable += t.answerable ? 1 : 0;
  }
  CHECK(answerable > 150);
  CHECK(answerable < 250);
}

TEST_CASE("clean qa instances label exactly the answer boxes") {
  const QaBuildConfig cfg;
  const GroundTruthOcr ocr;
  int with = 0;
  for (int i = 0; i < 60; ++i) {
    Rng rng = make_rng(5, "qa", i);
    const QaText t = synth_qa_text(rng);
    const QAInstance inst = build_qa_instance(t.question, t.context, t.answer, cfg, ocr, rng, registry(), bitmap());
    CHECK(inst.image.pixels.height() == 64);
    CHECK(inst.mask.grid() == PatchGrid{4, 4, 16});
    CHECK(inst.has_answer == inst.mask.any());
    CHECK(inst.question_rows == 1);
    for (int c = 0; c < 4; ++c) CHECK_FALSE(inst.mask.get(0, c));
    REQUIRE(inst.image.truth.has_value());
    std::vector<PixelBox> answer_boxes;
    for (const auto& w : inst.image.truth->word_boxes)
      if (w.text == t.answer && w.box.y0 >= 16) answer_boxes.push_back(w.box);
    CHECK(inst.mask == boxes_to_mask(answer_boxes, inst.mask.grid()));
    if (!t.answerable) CHECK_FALSE(inst.has_answer);
    with += inst.has_answer ? 1 : 0;
  }
  CHECK(with > 10);
}

TEST_CASE("noisy qa instances keep mask and image consistent") {
  QaBuildConfig cfg;
  cfg.noisy = true;
  const GroundTruthOcr ocr;
  for (int i = 0; i < 40; ++i) {
    Rng rng = make_rng(6, "qa", i);
    const QaText t = synth_qa_text(rng);
    const QAInstance inst = build_qa_instance(t.question, t.context, t.answer, cfg, ocr, rng, registry(), bitmap());
    CHECK(inst.has_answer == inst.mask.any());
    CHECK(inst.image.truth.has_value() == !inst.transform.geometric());
    for (float v : inst.image.pixels.data()) {
      CHECK(v >= 0.0F);
      CHECK(v <= 1.0F);
    }
  }
  Rng a = make_rng(6, "qa", 3), b = make_rng(6, "qa", 3);
  const QaText ta = synth_qa_text(a), tb = synth_qa_text(b);
  CHECK(build_qa_instance(ta.question, ta.context, ta.answer, cfg, ocr, a, registry(), bitmap()).image.pixels ==
        build_qa_instance(tb.question, tb.context, tb.answer, cfg, ocr, b, registry(), bitmap()).image.pixels);
}

TEST_CASE("qa_metrics on the two-instance fixture") {
  const PatchGrid g{2, 2, 16};
  PatchMask answer(g);
  answer.set(0, 0);
  const PatchMask none(g);
  const std::vector<std::vector<float>> pred{{0.9F, 0.8F, 0.7F, 0.1F}, {0.1F, 0.2F, 0.3F, 0.4F}};
  const QAMetrics m = qa_metrics(pred, std::vector<PatchMask>{answer, none});
  CHECK(m.binary_acc == 1.0);
  CHECK(m.patch_acc == doctest::Approx(1.0 / 3.0));
  CHECK(m.one_overlap == 1.0);
  CHECK(m.n_with_answer == 1);
  CHECK(m.n_without == 1);
  CHECK_THROWS_AS(qa_metrics({pred[0]}, std::vector<PatchMask>{answer, none}), Error);
}

TEST_CASE("qa_metrics is permutation invariant") {
  const PatchGrid g{3, 3, 16};
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<float>> pred;
    std::vector<PatchMask> truth;
    for (int i = 0; i < 12; ++i) {
      std::vector<float> p(9);
      for (float& v : p) v = static_cast<float>(uniform(rng, 0, 1));
      PatchMask m(g);
      if (bernoulli(rng, 0.5))
        for (int k = 0; k < 9; ++k) m.set_flat(k, bernoulli(rng, 0.3));
      pred.push_back(p);
      truth.push_back(m);
    }
    const QAMetrics a = qa_metrics(pred, truth);
    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<float>> pp;
    std::vector<PatchMask> tp;
    for (int i : perm) {
      pp.push_back(pred[i]);
      tp.push_back(truth[i]);
    }
    const QAMetrics b = qa_metrics(pp, tp);
    CHECK(a.binary_acc == doctest::Approx(b.binary_acc));
    CHECK(a.patch_acc == doctest::Approx(b.patch_acc));
    CHECK(a.one_overlap == doctest::Approx(b.one_overlap));
  }
}

TEST_CASE("balanced subsets have equal class counts") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const int n = uniform_int(rng, 2, 60);
    std::vector<bool> flags(n);
    for (int i = 0; i < n; ++i) flags[i] = bernoulli(rng, 0.3);
    flags[0] = true;
    flags[1] = false;
    const auto idx = balanced_indices(flags, rng);
    const auto yes = std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return flags[i]; });
    CHECK(yes * 2 == static_cast<long>(idx.size()));
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
  }
  try {
    balanced_indices({true, true}, rng);
    FAIL("expected OneClassOnly");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OneClassOnly);
  }
}

TEST_CASE("sentence-pair task labels follow the marker") {
  const std::vector<std::string> vocab{"marker", "ship", "sugar", "port", "crew", "cargo"};
  SeqTaskConfig cfg;
  Rng rng(9);
  const auto examples = synth_seq_task(vocab, 80, false, rng, cfg, registry(), bitmap());
  int positives = 0;
  for (const auto& ex : examples) {
    std::istringstream s1(ex.s1), s2(ex.s2);
    std::set<std::string> w1{std::istream_iterator<std::string>(s1), {}};
    std::set<std::string> w2{std::istream_iterator<std::string>(s2), {}};
    CHECK(w1.count("marker") == 0);
    CHECK((w2.count("marker") == 1) == (ex.label == 1));
    CHECK(ex.scan.pixels.height() == 64);
    positives += ex.label;
  }
  CHECK(positives > 20);
  CHECK(positives < 60);
  Rng a(9);
  CHECK(synth_seq_task(vocab, 3, true, a, cfg, registry(), bitmap())[2].scan.pixels ==
        [&] {
          Rng b(9);
          return synth_seq_task(vocab, 3, true, b, cfg, registry(), bitmap())[2].scan.pixels;
        }());
  CHECK_THROWS_AS(synth_seq_task({"only"}, 1, false, rng, cfg, registry(), bitmap()), Error);
}
