#include <doctest.h>

#include <cmath>
#include <set>

#include "gradcheck.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/masking.hpp"
#include "pixeldoc/model.hpp"

using namespace pixeldoc;

namespace {

Image random_image(int h, int w, Rng& rng) {
  Image img(h, w, 1, 1.0F);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(y, x, 0) = static_cast<float>(uniform(rng, 0.0, 1.0));
  return img;
}

PatchMask random_mask(const PatchGrid& g, Rng& rng, double p) {
  PatchMask m(g);
  for (int i = 0; i < g.count(); ++i) m.set_flat(i, bernoulli(rng, p));
  m.set_flat(0, false);
  m.set_flat(1, true);
  return m;
}

}  // namespace

TEST_CASE("parameter count matches the closed form for the desk default") {
  ModelConfig cfg;
  CHECK(parameter_count(cfg) == 187520);
  CHECK(ModelParams<float>::init(cfg, 1).size() == 187520);
  cfg.seq_classes = 3;
  cfg.patch_head = true;
  CHECK(ModelParams<float>::init(cfg, 1).size() == 187520 + 64 * 3 + 3 + 65);
}

TEST_CASE("config validation") {
  ModelConfig cfg;
  cfg.heads = 5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.image_hw = 60;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("patchify layout and round trip") {
  Image img(32, 32, 1, 0.25F);
  const PatchGrid g{2, 2, 16};
  const Mat<float> p = patchify<float>(img, g);
  CHECK(p.rows() == 4);
  CHECK(p.cols() == 256);
  CHECK((p.array() == 0.25F).all());

  Rng rng(3);
  Image r = random_image(32, 48, rng);
  const PatchGrid g2{2, 3, 16};
  const Mat<float> q = patchify<float>(r, g2);
  CHECK(q(4, 0) == r.at(16, 16, 0));
  CHECK(q(1, 17) == r.at(1, 17, 0));
  CHECK(unpatchify(q, g2, 1) == r);
  CHECK_THROWS_AS(patchify<float>(img, g2), Error);
}

TEST_CASE("sin-cos positions are distinct per patch") {
  const Mat<double> t = sincos_positions<double>(23, 23, 64);
  std::set<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < t.rows(); ++i) rows.insert(std::vector<double>(t.row(i).data(), t.row(i).data() + t.cols()));
  CHECK(rows.size() == 529);
}

TEST_CASE("mae loss definitions") {
  ModelConfig cfg;
  cfg.norm_pix = false;
  auto params = ModelParams<double>::init(cfg, 7);
  const Mat<double> zeros = Mat<double>::Zero(cfg.tokens(), cfg.patch_dim());
  Rng rng(5);
  const PatchMask mask = random_mask(cfg.grid(), rng, 0.4);
  const MaeOutput<double> out = forward_mae(params, zeros, mask);
  double sum = 0;
  int n = 0;
  for (int i = 0; i < cfg.tokens(); ++i)
    if (mask[i]) {
      sum += out.reconstruction.row(i).squaredNorm();
      n += cfg.patch_dim();
    }
  CHECK(out.loss == doctest::Approx(sum / n).epsilon(1e-12));

  CHECK(forward_mae(params, zeros, PatchMask(cfg.grid())).loss == 0.0);
  PatchMask all(cfg.grid());
  for (int i = 0; i < cfg.tokens(); ++i) all.set_flat(i, true);
  CHECK_THROWS_AS(forward_mae(params, zeros, all), Error);
}

TEST_CASE("mae loss ignores targets outside the mask") {
  ModelConfig cfg;
  auto params = ModelParams<double>::init(cfg, 9);
  Rng rng(11);
  Mat<double> x = patchify<double>(random_image(64, 64, rng), cfg.grid());
  const PatchMask mask = random_mask(cfg.grid(), rng, 0.5);
  MaeTape<double> tape;
  const double base = forward_mae(params, x, mask, &tape).loss;
  // visible patches also feed the encoder, so perturb their targets directly
  double restricted = 0;
  int n = 0;
  for (int i = 0; i < cfg.tokens(); ++i)
    if (mask[i]) {
      restricted += (tape.pred.row(i) - tape.target.row(i)).squaredNorm();
      n += cfg.patch_dim();
    }
  CHECK(base == doctest::Approx(restricted / n));
  Mat<double> target2 = tape.target;
  for (int i = 0; i < cfg.tokens(); ++i)
    if (!mask[i]) target2.row(i).setConstant(123.0);
  double again = 0;
  for (int i = 0; i < cfg.tokens(); ++i)
    if (mask[i]) again += (tape.pred.row(i) - target2.row(i)).squaredNorm();
  CHECK(again / n == doctest::Approx(base));
}

TEST_CASE("zero head gives uniform outputs") {
  ModelConfig cfg;
  cfg.seq_classes = 4;
  cfg.patch_head = true;
  auto params = ModelParams<double>::init(cfg, 2);
  params.seq_head->w.setZero();
  params.patch_head->w.setZero();
  Rng rng(1);
  const Mat<double> x = patchify<double>(random_image(64, 64, rng), cfg.grid());
  CHECK(head_sequence(params, x).cwiseAbs().maxCoeff() == 0.0);
  for (double p : head_patch(params, x)) CHECK(p == 0.5);
  Mat<double> d;
  CHECK(patch_loss(head_patch_logits(params, x), random_mask(cfg.grid(), rng, 0.3), d) ==
        doctest::Approx(std::log(2.0)));

  ModelParams<double> none = ModelParams<double>::init(ModelConfig{}, 2);
  CHECK_THROWS_AS(head_sequence(none, x), Error);
  CHECK_THROWS_AS(head_patch(none, x), Error);
}

TEST_CASE("mean pooling is permutation invariant for identical patches") {
  ModelConfig cfg;
  cfg.image_hw = 16;
  cfg.seq_classes = 2;
  auto params = ModelParams<double>::init(cfg, 4);
  Rng rng(8);
  const Mat<double> x = patchify<double>(random_image(16, 16, rng), cfg.grid());
  HeadTape<double> tape;
  head_sequence(params, x, &tape);
  const Mat<double> enc = encode_all(params, x);
  CHECK((tape.pooled - enc).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  ModelConfig cfg;
  auto params = ModelParams<double>::init(cfg, 3);
  Rng rng(4);
  const Mat<double> x = patchify<double>(random_image(64, 64, rng), cfg.grid());
  MaeTape<double> tape;
  forward_mae(params, x, random_mask(cfg.grid(), rng, 0.4), &tape);
  ModelParams<double> g = params.zeros_like();
  backward_mae(params, tape, 0.0, g);
  double total = 0;
  g.for_each([&](const std::string&, const Mat<double>& m) { total += m.cwiseAbs().sum(); });
  CHECK(total == 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  ModelConfig cfg;
  cfg.seq_classes = 3;
  cfg.patch_head = true;
  auto params = ModelParams<double>::init(cfg, 21);
  Rng rng(99);
  Example<double> ex;
  ex.patches = patchify<double>(random_image(64, 64, rng), cfg.grid());
  ex.mask = random_mask(cfg.grid(), rng, 0.4);
  ex.label = 2;
  for (Objective obj : {Objective::Mae, Objective::SeqHead, Objective::PatchHead}) {
    for (const auto& probe : testing::gradient_check(params, ex, obj, 30, rng)) {
      INFO(probe.tensor, "[", probe.index, "] analytic ", probe.analytic, " numeric ", probe.numeric);
      CHECK(probe.rel_error() < 1e-4);
    }
  }
  ModelConfig reg = cfg;
  reg.seq_classes = 1;
  auto rparams = ModelParams<double>::init(reg, 5);
  ex.value = 0.7;
  for (const auto& probe : testing::gradient_check(rparams, ex, Objective::SeqHead, 30, rng)) {
    INFO(probe.tensor, "[", probe.index, "]");
    CHECK(probe.rel_error() < 1e-4);
  }
}

TEST_CASE("dropout is active only with an rng") {
  ModelConfig cfg;
  cfg.dropout = 0.5;
  cfg.seq_classes = 2;
  auto params = ModelParams<double>::init(cfg, 3);
  Rng rng(4);
  const Mat<double> x = patchify<double>(random_image(64, 64, rng), cfg.grid());
  CHECK(head_sequence(params, x) == head_sequence(params, x));
  Rng d1(1), d2(1);
  HeadTape<double>* none = nullptr;
  CHECK(head_sequence(params, x, none, DropoutCtx{&d1, 0.5}) == head_sequence(params, x, none, DropoutCtx{&d2, 0.5}));
  Rng d3(2);
  CHECK(head_sequence(params, x, none, DropoutCtx{&d3, 0.5}) != head_sequence(params, x));
}

TEST_CASE("cast round trip") {
  auto p = ModelParams<float>::init(ModelConfig{}, 1);
  auto back = p.cast<double>().cast<float>();
  bool same = true;
  std::vector<const Mat<float>*> a, b;
  p.for_each([&](const std::string&, const Mat<float>& m) { a.push_back(&m); });
  back.for_each([&](const std::string&, const Mat<float>& m) { b.push_back(&m); });
  for (std::size_t i = 0; i < a.size(); ++i) same = same && (*a[i] == *b[i]);
  CHECK(same);
}
