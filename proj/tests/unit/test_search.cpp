#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>

#include "pixeldoc/errors.hpp"
#include "pixeldoc/search.hpp"

using namespace pixeldoc;

namespace {

std::vector<float> random_vec(int d, Rng& rng) {
  std::vector<float> v(d);
  for (float& x : v) x = static_cast<float>(uniform(rng, -1, 1));
  return v;
}

// Cosines in double precision, sorted by descending value then id.
std::vector<std::pair<std::string, double>> brute_force(const std::vector<std::pair<std::string, std::vector<float>>>& items,
                                                        const std::vector<float>& probe) {
  auto norm = [](const std::vector<float>& v) {
    double s = 0;
    for (float x : v) s += double(x) * x;
    return std::sqrt(s);
  };
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [id, v] : items) {
    double dot = 0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += double(v[i]) * probe[i];
    out.emplace_back(id, dot / (norm(v) * norm(probe)));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

std::filesystem::path tmp_dir() {
  const char* env = std::getenv("PIXELDOC_TMP");
  auto dir = std::filesystem::path(env != nullptr ? env : "/tmp") / "search";
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

}  // namespace

TEST_CASE("embeddings are unit vectors and deterministic") {
  const auto params = ModelParams<float>::init(tiny(), 1);
  Rng rng(2);
  for (int t = 0; t < 5; ++t) {
    Image img(32, 32);
    for (float& v : img.data()) v = static_cast<float>(uniform(rng, 0, 1));
    const auto e = embed(params, img);
    REQUIRE(e.size() == 16);
    double s = 0;
    for (float x : e) s += double(x) * x;
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(embed(params, img) == e);
  }
}

TEST_CASE("query matches a brute-force ranking") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const int d = uniform_int(rng, 2, 24), n = uniform_int(rng, 1, 80);
    std::vector<std::pair<std::string, std::vector<float>>> items;
    EmbeddingIndex index(d);
    for (int i = 0; i < n; ++i) {
      items.emplace_back("doc" + std::to_string(i), random_vec(d, rng));
      index.add(items.back().first, items.back().second);
    }
    const auto probe = random_vec(d, rng);
    const std::size_t k = static_cast<std::size_t>(uniform_int(rng, 1, n));
    const auto hits = index.query(probe, k);
    const auto want = brute_force(items, probe);
    REQUIRE(hits.size() == k);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(hits[i].id == want[i].first);
      CHECK(hits[i].cosine == doctest::Approx(want[i].second).epsilon(1e-5));
      if (i > 0) CHECK(hits[i].cosine <= hits[i - 1].cosine);
    }
  }
}

TEST_CASE("ties are broken by id and insertion order does not matter") {
  EmbeddingIndex a(3), b(3);
  const std::vector<std::pair<std::string, std::vector<float>>> items{
      {"c", {1, 0, 0}}, {"a", {2, 0, 0}}, {"b", {0, 1, 0}}, {"d", {0.5F, 0, 0}}, {"e", {1, 1, 0}}};
  for (const auto& [id, v] : items) a.add(id, v);
  for (auto it = items.rbegin(); it != items.rend(); ++it) b.add(it->first, it->second);
  const std::vector<float> probe{1, 0, 0};
  const auto ha = a.query(probe, 5);
  CHECK(ha == b.query(probe, 5));
  CHECK(ha[0].id == "a");
  CHECK(ha[1].id == "c");
  CHECK(ha[2].id == "d");
  CHECK(ha[3].id == "e");
  CHECK(ha[4].id == "b");

  Rng rng(4);
  EmbeddingIndex x(8), y(8);
  std::vector<std::pair<std::string, std::vector<float>>> many;
  for (int i = 0; i < 40; ++i) many.emplace_back("id" + std::to_string(i), random_vec(8, rng));
  for (const auto& [id, v] : many) x.add(id, v);
  std::shuffle(many.begin(), many.end(), rng);
  for (const auto& [id, v] : many) y.add(id, v);
  const auto probe8 = random_vec(8, rng);
  CHECK(x.query(probe8, 10) == y.query(probe8, 10));
}

TEST_CASE("index misuse raises the documented errors") {
  EmbeddingIndex index(3);
  CHECK(kind_of([&] { index.query(std::vector<float>{1, 0, 0}, 1); }) == ErrorKind::EmptyIndex);
  index.add("a", std::vector<float>{1, 2, 3});
  CHECK(kind_of([&] { index.add("a", std::vector<float>{3, 2, 1}); }) == ErrorKind::UsageError);
  CHECK(kind_of([&] { index.add("z", std::vector<float>{0, 0, 0}); }) == ErrorKind::UsageError);
  CHECK(kind_of([&] { index.add("w", std::vector<float>{1, 2}); }) == ErrorKind::ShapeMismatch);
  CHECK(kind_of([&] { index.query(std::vector<float>{1, 0, 0}, 2); }) == ErrorKind::UsageError);
  CHECK(kind_of([&] { index.query(std::vector<float>{1, 0}, 1); }) == ErrorKind::ShapeMismatch);
  CHECK(index.size() == 1);
}

TEST_CASE("indexes round trip through disk") {
  Rng rng(5);
  EmbeddingIndex index(6, "0123456789abcdef");
  for (int i = 0; i < 25; ++i) index.add("scan_" + std::to_string(i), random_vec(6, rng));
  const auto path = tmp_dir() / "index.pxix";
  index.save(path);
  const EmbeddingIndex back = EmbeddingIndex::load(path);
  CHECK(back.width() == 6);
  CHECK(back.fingerprint() == "0123456789abcdef");
  CHECK(back.ids() == index.ids());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto u = index.vector(i), v = back.vector(i);
    CHECK(std::equal(u.begin(), u.end(), v.begin(), v.end()));
  }
  const auto probe = random_vec(6, rng);
  CHECK(back.query(probe, 7) == index.query(probe, 7));

  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  auto write = [&](const std::string& name, const std::string& content) {
    const auto p = tmp_dir() / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  };
  CHECK(kind_of([&] { EmbeddingIndex::load(write("magic.pxix", "XXXX" + bytes.substr(4))); }) == ErrorKind::Format);
  CHECK(kind_of([&] { EmbeddingIndex::load(write("short.pxix", bytes.substr(0, bytes.size() - 3))); }) ==
        ErrorKind::Format);
  CHECK(kind_of([&] { EmbeddingIndex::load(write("long.pxix", bytes + "x")); }) == ErrorKind::Format);
  CHECK(kind_of([&] { EmbeddingIndex::load(tmp_dir() / "absent.pxix"); }) == ErrorKind::Io);
}
