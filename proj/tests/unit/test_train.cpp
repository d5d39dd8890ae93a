#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>

#include "pixeldoc/checkpoint.hpp"
#include "pixeldoc/config.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/train.hpp"

using namespace pixeldoc;
using Json = nlohmann::json;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.image_hw = 32;
  c.width = 16;
  c.heads = 2;
  c.mlp_ratio = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  return c;
}

Example<float> random_example(const ModelConfig& cfg, Rng& rng) {
  Example<float> ex;
  ex.patches = Mat<float>(cfg.tokens(), cfg.patch_dim());
  for (Eigen::Index i = 0; i < ex.patches.size(); ++i) ex.patches.data()[i] = static_cast<float>(uniform(rng, 0, 1));
  ex.mask = PatchMask(cfg.grid());
  ex.mask.set_flat(1, true);
  ex.mask.set_flat(2, true);
  return ex;
}

std::filesystem::path tmp_dir() {
  const char* env = std::getenv("PIXELDOC_TMP");
  auto dir = std::filesystem::path(env != nullptr ? env : "/tmp") / "train";
  std::filesystem::create_directories(dir);
  return dir;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::UsageError;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  const Schedule s{1e-3, 1e-5, 10, 100};
  for (int step = 0; step < 10; ++step) CHECK(s.lr(step) == doctest::Approx(1e-3 * (step + 1) / 10));
  CHECK(s.lr(9) == doctest::Approx(1e-3));
  for (int step = 10; step < 100; ++step) {
    const double t = (step - 10) / 89.0;
    CHECK(s.lr(step) == doctest::Approx(1e-5 + 0.5 * (1e-3 - 1e-5) * (1 + std::cos(std::numbers::pi * t))));
    if (step > 10) CHECK(s.lr(step) <= s.lr(step - 1));
  }
  CHECK(s.lr(99) == doctest::Approx(1e-5));
  CHECK_THROWS_AS((Schedule{0.0, 0.0, 1, 1}.validate()), Error);
  CHECK_THROWS_AS((Schedule{1e-3, 1e-2, 1, 1}.validate()), Error);
}

TEST_CASE("adamw matches a hand-written update") {
  auto params = ModelParams<float>::init(tiny(), 1);
  const auto before = params;
  AdamWConfig cfg{0.9, 0.99, 1e-8, 0.1};
  OptimState opt = OptimState::for_params(params, Schedule{1e-2, 0.0, 0, 10}, cfg);
  auto grads = params.zeros_like();
  Rng rng(2);
  grads.for_each([&](const std::string&, Mat<float>& g) {
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = static_cast<float>(uniform(rng, -1, 1));
  });
  const double lr = 1e-2;
  adamw_update(params, opt, grads, lr);
  adamw_update(params, opt, grads, lr);

  std::vector<const Mat<float>*> p0, g0;
  before.for_each([&](const std::string&, const Mat<float>& t) { p0.push_back(&t); });
  grads.for_each([&](const std::string&, const Mat<float>& t) { g0.push_back(&t); });
  std::size_t k = 0;
  params.for_each([&](const std::string& name, const Mat<float>& t) {
    const bool decay = name.ends_with(".w");
    for (Eigen::Index i = 0; i < t.size(); i += 7) {
      double w = p0[k]->data()[i], m = 0, v = 0;
      const double g = g0[k]->data()[i];
      for (int step = 1; step <= 2; ++step) {
        m = 0.9 * m + 0.1 * g;
        v = 0.99 * v + 0.01 * g * g;
        if (decay) w -= lr * 0.1 * w;
        w -= lr * (m / (1 - std::pow(0.9, step))) / (std::sqrt(v / (1 - std::pow(0.99, step))) + 1e-8);
      }
      CHECK(t.data()[i] == doctest::Approx(w).epsilon(1e-5));
    }
    ++k;
  });
  CHECK(opt.step == 2);
}

TEST_CASE("weight decay only touches matrices") {
  auto params = ModelParams<float>::init(tiny(), 3);
  params.for_each([](const std::string&, Mat<float>& t) { t.setConstant(1.0F); });
  OptimState opt = OptimState::for_params(params, Schedule{0.1, 0.0, 0, 10}, AdamWConfig{0.9, 0.999, 1e-8, 0.5});
  adamw_update(params, opt, params.zeros_like(), 0.1);
  params.for_each([](const std::string& name, const Mat<float>& t) {
    const float expected = name.ends_with(".w") ? 0.95F : 1.0F;
    CHECK(t(0, 0) == doctest::Approx(expected));
  });
}

TEST_CASE("non-finite loss stops before the update") {
  const ModelConfig cfg = tiny();
  auto params = ModelParams<float>::init(cfg, 4);
  OptimState opt = OptimState::for_params(params, {});
  Rng rng(5);
  std::vector<Example<float>> batch{random_example(cfg, rng)};
  batch[0].patches(0, 0) = std::numeric_limits<float>::quiet_NaN();
  const auto before = serialize_checkpoint(params);
  try {
    train_step(params, opt, batch, Objective::Mae, 17);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
    CHECK(std::string(e.what()).find("batch 17") != std::string::npos);
  }
  CHECK(serialize_checkpoint(params) == before);
  CHECK(opt.step == 0);
}

TEST_CASE("training is deterministic and lowers the loss") {
  ModelConfig cfg = tiny();
  cfg.dropout = 0.1;
  std::vector<Example<float>> data;
  Rng rng(6);
  for (int i = 0; i < 4; ++i) data.push_back(random_example(cfg, rng));
  const BatchSource source = [&](int) { return data; };
  auto run = [&] {
    auto params = ModelParams<float>::init(cfg, 7);
    OptimState opt = OptimState::for_params(params, Schedule{3e-3, 1e-4, 5, 60});
    TrainOptions o;
    o.steps = 60;
    o.seed = 8;
    const auto log = train(params, opt, source, o);
    return std::pair{serialize_checkpoint(params), log};
  };
  const auto [a, log_a] = run();
  const auto [b, log_b] = run();
  CHECK(a == b);
  REQUIRE(log_a.size() == 60);
  for (std::size_t i = 0; i < log_a.size(); ++i) CHECK(log_a[i].loss == log_b[i].loss);
  CHECK(log_a.back().loss < 0.7 * log_a.front().loss);
  CHECK(log_a.front().step == 0);
  CHECK(log_a.back().lr == doctest::Approx(1e-4));
}

TEST_CASE("fnv-1a fingerprints") {
  CHECK(fingerprint("") == "cbf29ce484222325");
  CHECK(fingerprint("a") == "af63dc4c8601ec8c");
  CHECK(fingerprint("foobar") == "85944171f73967e8");
}

TEST_CASE("checkpoints round trip exactly") {
  ModelConfig cfg = tiny();
  cfg.seq_classes = 3;
  cfg.patch_head = true;
  const auto params = ModelParams<float>::init(cfg, 9);
  const auto path = tmp_dir() / "model.pxdc";
  save_checkpoint(path, params);
  const auto back = load_checkpoint(path);
  CHECK(back.config == params.config);
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(params));
  CHECK(file_fingerprint(path) == fingerprint(serialize_checkpoint(params)));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto bytes = serialize_checkpoint(ModelParams<float>::init(tiny(), 10));
  CHECK(kind_of([&] { deserialize_checkpoint("XXXX" + bytes.substr(4)); }) == ErrorKind::Format);
  CHECK(kind_of([&] { deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)); }) == ErrorKind::Format);
  std::string version = bytes;
  version[4] = 9;
  CHECK(kind_of([&] { deserialize_checkpoint(version); }) == ErrorKind::Format);

  auto params = ModelParams<float>::init(tiny(), 10);
  params.patch_embed.w(0, 0) = std::numeric_limits<float>::infinity();
  CHECK(kind_of([&] { deserialize_checkpoint(serialize_checkpoint(params)); }) == ErrorKind::Format);
  CHECK(kind_of([&] { load_checkpoint(tmp_dir() / "absent.pxdc"); }) == ErrorKind::Io);
}

TEST_CASE("run config round trips and rejects unknown keys") {
  RunConfig c;
  c.seed = 99;
  c.optim.lr = 2e-3;
  c.qa.noisy = true;
  c.render.families = {"mono", "mono-bold"};
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  CHECK(kind_of([] { run_config_from_json(Json{{"nope", 1}}); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([] { run_config_from_json(Json{{"optim", {{"steps", "many"}}}}); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([] { run_config_from_json(Json{{"model", {{"heads", 5}}}}); }) == ErrorKind::ConfigInvalid);
  try {
    run_config_from_json(Json{{"optim", {{"bogus", 1}}}});
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("optim.bogus") != std::string::npos);
  }
}

TEST_CASE("dotted overrides") {
  Json tree = to_json(RunConfig{});
  set_config_value(tree, "optim.steps", "25");
  set_config_value(tree, "qa.ocr", "noisy:0.1");
  set_config_value(tree, "qa.noisy", "true");
  set_config_value(tree, "optim.lr", "1");
  const RunConfig c = run_config_from_json(tree);
  CHECK(c.optim.steps == 25);
  CHECK(c.qa.ocr == "noisy:0.1");
  CHECK(c.qa.noisy);
  CHECK(c.optim.lr == 1.0);
  CHECK(kind_of([&] { set_config_value(tree, "optim.steps", "2.5"); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([&] { set_config_value(tree, "optim.nothing", "1"); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([&] { set_config_value(tree, "optim.steps", "{"); }) == ErrorKind::ConfigInvalid);
}
