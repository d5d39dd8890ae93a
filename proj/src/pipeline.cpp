#include "pixeldoc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "pixeldoc/errors.hpp"
#include "pixeldoc/sample_corpus.hpp"

namespace pixeldoc {

Toolkit Toolkit::from_config(const RunConfig& cfg) {
  Toolkit kit;
  kit.backend = make_rasterizer(cfg.backend);
  kit.corpus = cfg.paths.corpus.empty() ? ParagraphCorpus::from_text(sample_corpus_text())
                                        : ParagraphCorpus::from_file(cfg.paths.corpus);
  require(!kit.corpus.empty(), ErrorKind::EmptyCorpus, "corpus has no paragraphs");
  for (const auto& f : cfg.render.families)
    require(kit.fonts.contains(f), ErrorKind::FontResolution, "render.families: unknown family '" + f + "'");
  return kit;
}

int default_threads() {
  if (const char* env = std::getenv("PIXELDOC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  int failed_at = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

SynthScan synth_scan(const RunConfig& cfg, const Toolkit& kit, int index) {
  Rng rng = make_rng(cfg.seed, "synth", static_cast<std::uint64_t>(index));
  const RenderPlan plan = layout_paragraphs(kit.corpus, rng, cfg.render, kit.fonts);
  SynthScan out;
  out.scan = rasterize(plan, kit.fonts, *kit.backend);
  out.scan.meta.seed = derive_seed(cfg.seed, "synth", static_cast<std::uint64_t>(index));
  out.scan.meta.source_id = "synth-" + std::to_string(index);
  if (cfg.synth.degrade) {
    Degraded d = degrade(out.scan, cfg.degrade, rng);
    out.scan = std::move(d.scan);
    out.transform = std::move(d.transform);
  }
  return out;
}

QaBuildConfig qa_build_config(const RunConfig& cfg) {
  QaBuildConfig q;
  q.width = cfg.model.image_hw;
  q.height = cfg.model.image_hw;
  q.patch_size = cfg.model.patch_size;
  q.margin = cfg.render.margin;
  q.noisy = cfg.qa.noisy;
  q.min_font = cfg.qa.min_font;
  q.max_font = cfg.qa.max_font;
  q.families = cfg.render.families;
  q.degrade = cfg.degrade;
  q.max_norm_dist = cfg.qa.max_norm_dist;
  return q;
}

std::unique_ptr<OcrEngine> qa_ocr(const RunConfig& cfg) { return make_ocr(cfg.qa.ocr, derive_seed(cfg.seed, "ocr")); }

QAInstance qa_instance(const RunConfig& cfg, const Toolkit& kit, const OcrEngine& ocr, int index) {
  Rng rng = make_rng(cfg.seed, "qa", static_cast<std::uint64_t>(index));
  SyntheticQaConfig sq;
  sq.min_words = cfg.qa.min_words;
  sq.max_words = cfg.qa.max_words;
  sq.answerable_prob = cfg.qa.answerable_prob;
  const QaText text = synth_qa_text(rng, sq);
  return build_qa_instance(text.question, text.context, text.answer, qa_build_config(cfg), ocr, rng, kit.fonts,
                           *kit.backend);
}

std::vector<std::string> corpus_vocab(const ParagraphCorpus& corpus) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    std::string word;
    auto flush = [&] {
      if (word.size() >= 3 && seen.insert(word).second) out.push_back(word);
      word.clear();
    };
    for (char ch : corpus[p]) {
      if (std::isalpha(static_cast<unsigned char>(ch)) != 0) {
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      } else {
        flush();
      }
    }
    flush();
  }
  return out;
}

SeqTaskConfig seq_task_config(const RunConfig& cfg) {
  SeqTaskConfig s;
  s.pair.width = cfg.model.image_hw;
  s.pair.height = cfg.model.image_hw;
  s.pair.margin = cfg.render.margin;
  s.pair.min_font = cfg.render.min_font;
  s.pair.max_font = cfg.render.max_font;
  s.pair.families = cfg.render.families;
  s.pair.degrade = cfg.degrade;
  s.marker = cfg.seq.marker;
  s.marker_prob = cfg.seq.marker_prob;
  s.min_words = cfg.seq.min_words;
  s.max_words = cfg.seq.max_words;
  return s;
}

SeqExample seq_instance(const RunConfig& cfg, const Toolkit& kit, const std::vector<std::string>& vocab, int index) {
  Rng rng = make_rng(cfg.seed, "seq", static_cast<std::uint64_t>(index));
  auto out = synth_seq_task(vocab, 1, cfg.seq.noisy, rng, seq_task_config(cfg), kit.fonts, *kit.backend);
  return std::move(out.front());
}

bool in_validation(int index, int n, double fraction) {
  const int n_val = static_cast<int>(std::lround(fraction * n));
  return index >= n - n_val;
}

Schedule schedule_from(const OptimConfig& o) {
  Schedule s;
  s.peak_lr = o.lr;
  s.min_lr = o.min_lr;
  s.warmup_steps = o.warmup;
  s.total_steps = std::max(1, o.steps);
  return s;
}

AdamWConfig adamw_from(const OptimConfig& o) { return {o.beta1, o.beta2, o.eps, o.weight_decay}; }

}  // namespace pixeldoc
