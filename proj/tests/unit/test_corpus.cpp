#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "pixeldoc/corpus.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/manifest.hpp"

using namespace pixeldoc;

namespace {

Image random_image(int h, int w, Rng& rng) {
  Image img(h, w);
  for (float& v : img.data()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  return img;
}

// Ink blocks in the given column ranges, every other 10 px band.
Image column_page(int h, int w, const std::vector<std::pair<int, int>>& columns) {
  Image page(h, w, 1, 1.0F);
  for (const auto& [x0, x1] : columns)
    for (int y = 5; y < h - 5; ++y)
      if ((y / 10) % 2 == 0)
        for (int x = x0; x < x1; ++x) page.at(y, x) = 0.0F;
  return page;
}

DatasetManifest pages_manifest(int pages, int crops_per_page) {
  DatasetManifest m;
  for (int p = 0; p < pages; ++p)
    for (int c = 0; c < crops_per_page; ++c) {
      ManifestEntry e;
      e.source = "page" + std::to_string(p);
      e.path = e.source + "_" + std::to_string(c) + ".png";
      e.crop_offset = c * 128;
      m.entries.push_back(e);
    }
  return m;
}

std::filesystem::path tmp_dir() {
  const char* env = std::getenv("PIXELDOC_TMP");
  auto dir = std::filesystem::path(env != nullptr ? env : "/tmp") / "corpus";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("crop counts and offsets") {
  CHECK(crop_count(368, 368, 128) == 1);
  CHECK(crop_count(1000, 368, 128) == 5);
  CHECK(crop_count(100, 368, 128) == 1);

  Rng rng(1);
  const Image strip = random_image(1000, 368, rng);
  const auto crops = sliding_crops(strip, 368, 128);
  REQUIRE(crops.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(crops[i].offset == 128 * i);
    CHECK(crops[i].scan.pixels.height() == 368);
    CHECK(crops[i].scan.pixels.width() == 368);
    CHECK(crops[i].scan.pixels.at(0, 7) == strip.at(128 * i, 7));
    CHECK(crops[i].scan.pixels.at(367, 360) == strip.at(128 * i + 367, 360));
  }
  const auto anchored = sliding_crops(strip, 368, 128, true);
  REQUIRE(anchored.size() == 6);
  CHECK(anchored.back().offset == 1000 - 368);
}

TEST_CASE("short strips give one bottom-padded crop") {
  Image strip(100, 368, 1, 0.0F);
  const auto crops = sliding_crops(strip, 368, 128);
  REQUIRE(crops.size() == 1);
  CHECK(crops[0].scan.pixels.height() == 368);
  CHECK(crops[0].scan.pixels.at(99, 0) == 0.0F);
  CHECK(crops[0].scan.pixels.at(100, 0) == 1.0F);
  CHECK_THROWS_AS(sliding_crops(Image(400, 300), 368, 128), Error);
}

TEST_CASE("crop count matches enumeration over a height sweep") {
  for (int h = 368; h <= 5000; h += 53) {
    const int expected = (h - 368) / 128 + 1;
    CHECK(crop_count(h, 368, 128) == expected);
    CHECK(static_cast<int>(sliding_crops(Image(h, 368), 368, 128).size()) == expected);
  }
  for (int h = 16; h <= 400; ++h) CHECK(static_cast<int>(sliding_crops(Image(h, 16), 16, 5).size()) == crop_count(h, 16, 5));
}

TEST_CASE("two columns split inside the gutter") {
  const Image page = column_page(200, 300, {{10, 130}, {170, 290}});
  const PageRegions r = detect_columns(page);
  REQUIRE(r.regions.size() == 2);
  const int split = r.regions[0].box.x1;
  CHECK(split >= 130);
  CHECK(split <= 170);
  CHECK(r.regions[1].box.x0 == split);
  CHECK(r.regions[0].order == 0);
  CHECK(r.regions[1].order == 1);
}

TEST_CASE("single column and blank pages") {
  const Image page = column_page(100, 120, {{10, 110}});
  const PageRegions r = detect_columns(page);
  REQUIRE(r.regions.size() == 1);
  CHECK(r.regions[0].box == PixelBox{0, 0, 120, 100});
  try {
    detect_columns(Image(50, 50, 1, 1.0F));
    FAIL("expected NoInk");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoInk);
  }
}

TEST_CASE("narrow gaps do not split columns") {
  const Image page = column_page(100, 200, {{10, 95}, {100, 190}});
  CHECK(detect_columns(page).regions.size() == 1);
}

TEST_CASE("linearize resizes to the target width in reading order") {
  Rng rng(2);
  const Image page = random_image(100, 368, rng);
  PageRegions one;
  one.regions.push_back({{0, 0, 368, 100}, 0});
  CHECK(linearize(page, one, 368).strip == page);

  const Image wide = random_image(200, 920, rng);
  PageRegions two;
  two.regions.push_back({{0, 0, 736, 200}, 0});
  two.regions.push_back({{736, 0, 920, 100}, 1});
  const Image strip = linearize(wide, two, 368).strip;
  CHECK(strip.width() == 368);
  CHECK(strip.height() == 100 + 200);

  // bands of constant intensity reveal the order
  Image bands(30, 30, 1, 0.0F);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) bands.at(y, x) = static_cast<float>(x / 10) / 4.0F;
  PageRegions shuffled;
  shuffled.regions.push_back({{0, 0, 10, 30}, 2});
  shuffled.regions.push_back({{10, 0, 20, 30}, 0});
  shuffled.regions.push_back({{20, 0, 30, 30}, 1});
  const Image s = linearize(bands, shuffled, 10).strip;
  REQUIRE(s.height() == 90);
  CHECK(s.at(5, 5) == 0.25F);
  CHECK(s.at(35, 5) == 0.5F);
  CHECK(s.at(65, 5) == 0.0F);
}

TEST_CASE("linearize preserves ink mass per region") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const int w = uniform_int(rng, 50, 700), h = uniform_int(rng, 40, 400);
    const Image page = random_image(h, w, rng);
    PageRegions r;
    r.regions.push_back({{0, 0, w, h}, 0});
    const Image strip = linearize(page, r, 368).strip;
    const double scale = static_cast<double>(368 * strip.height()) / (w * h);
    CHECK(ink_mass(strip) == doctest::Approx(ink_mass(page) * scale).epsilon(0.02));
  }
}

TEST_CASE("degenerate regions are skipped and counted") {
  Rng rng(4);
  const Image page = random_image(50, 50, rng);
  PageRegions r;
  r.regions.push_back({{0, 0, 50, 50}, 1});
  r.regions.push_back({{10, 10, 10, 40}, 0});
  const LinearizedPage out = linearize(page, r, 25);
  CHECK(out.skipped == 1);
  CHECK(out.strip.height() == 25);

  PageRegions bad;
  bad.regions.push_back({{0, 0, 50, 50}, 3});
  CHECK_THROWS_AS(linearize(page, bad, 25), Error);
}

TEST_CASE("area resampling integrates exact boxes") {
  Rng rng(5);
  const Image img = random_image(8, 6, rng);
  const Image half = resize_area(img, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 3; ++x) {
      const float mean = (img.at(2 * y, 2 * x) + img.at(2 * y + 1, 2 * x) + img.at(2 * y, 2 * x + 1) +
                          img.at(2 * y + 1, 2 * x + 1)) / 4.0F;
      CHECK(half.at(y, x) == doctest::Approx(mean).epsilon(1e-5));
    }
  const Image odd = resize_area(img, 5, 7);
  double a = 0.0, b = 0.0;
  for (float v : img.data()) a += v;
  for (float v : odd.data()) b += v;
  CHECK(a / img.data().size() == doctest::Approx(b / odd.data().size()).epsilon(1e-5));
}

TEST_CASE("splits are page level") {
  Rng rng(6);
  const DatasetManifest m = split_dataset(pages_manifest(100, 3), 0.05, rng);
  std::set<std::string> train, val;
  for (const auto& e : m.entries) (e.split == "validation" ? val : train).insert(e.source);
  CHECK(val.size() == 5);
  CHECK(train.size() == 95);
  for (const auto& p : val) CHECK(train.count(p) == 0);
  CHECK(m.split_fraction == 0.05);

  Rng a(7), b(7);
  const auto x = split_dataset(pages_manifest(40, 2), 0.1, a), y = split_dataset(pages_manifest(40, 2), 0.1, b);
  for (std::size_t i = 0; i < x.entries.size(); ++i) CHECK(x.entries[i].split == y.entries[i].split);

  Rng c(8);
  for (const auto& e : split_dataset(pages_manifest(1, 4), 0.5, c).entries) CHECK(e.split == "train");
  CHECK_THROWS_AS(split_dataset(pages_manifest(3, 1), 0.0, c), Error);
}

TEST_CASE("validation share stays within one page of the target") {
  for (int pages = 2; pages < 60; ++pages) {
    for (double f : {0.05, 0.2, 0.5}) {
      Rng rng(static_cast<std::uint64_t>(pages));
      std::set<std::string> val;
      for (const auto& e : split_dataset(pages_manifest(pages, 1), f, rng).entries)
        if (e.split == "validation") val.insert(e.source);
      CHECK(std::abs(static_cast<double>(val.size()) - f * pages) <= 1.0);
    }
  }
}

TEST_CASE("manifests round trip through jsonl") {
  DatasetManifest m = pages_manifest(2, 2);
  RenderPlan plan;
  plan.width = 64;
  plan.height = 64;
  plan.word_boxes.push_back({"word", {1, 2, 30, 14}});
  m.entries[0].truth = plan;
  m.entries[0].seed = 12345678901234ULL;
  AppliedTransform t;
  t.rotation_deg = 1.5;
  t.effects.push_back({"rotation", {1.5}});
  m.entries[1].transform = t;
  const auto path = tmp_dir() / "manifest.jsonl";
  write_manifest(path, m);
  const DatasetManifest back = read_manifest(path);
  REQUIRE(back.entries.size() == 4);
  CHECK(back.entries[0].truth->word_boxes == plan.word_boxes);
  CHECK(back.entries[0].seed == 12345678901234ULL);
  CHECK(back.entries[1].transform == t);
  CHECK(back.entries[3].crop_offset == 128);
  CHECK(back.entries[3].source == "page1");
}

TEST_CASE("png round trip") {
  Rng rng(9);
  Image img = random_image(10, 13, rng);
  for (float& v : img.data()) v = std::round(v * 255.0F) / 255.0F;
  const auto path = tmp_dir() / "round.png";
  write_png(img, path);
  const Image back = read_png(path);
  REQUIRE(back.height() == 10);
  REQUIRE(back.width() == 13);
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-6));
  CHECK_THROWS_AS(read_png(tmp_dir() / "missing.png"), Error);
}
