#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <iostream>

#include "cli.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/manifest.hpp"

namespace pixeldoc::cli {

fs::path Context::output_dir() const {
  require(!cfg.paths.output.empty(), ErrorKind::UsageError, command + ": --out is required");
  const fs::path dir(cfg.paths.output);
  fs::create_directories(dir);
  return dir;
}

void Context::write_run_json(const fs::path& dir, const Json& extra) const {
  Json j{{"command", command}, {"version", kVersion}, {"seed", cfg.seed}, {"config", resolved}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_json(dir / "run.json", j);
}

std::string pad_index(int i) { return fmt::format("{:06d}", i); }

fs::path require_input(const std::string& path, const std::string& key) {
  require(!path.empty(), ErrorKind::UsageError, key + " is required");
  require(fs::exists(path), ErrorKind::Io, key + ": no such file or directory: " + path);
  return fs::path(path);
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Image fit_to_model(const Image& img, const ModelConfig& model) {
  Image gray = img.channels() == 1 ? img : img.to_gray();
  if (gray.height() != model.image_hw || gray.width() != model.image_hw)
    gray = resize_area(gray, model.image_hw, model.image_hw);
  return gray;
}

Image load_model_image(const fs::path& path, const ModelConfig& model) { return fit_to_model(read_png(path), model); }

void emit(const Json& j) { std::cout << j.dump(2) << std::endl; }

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<TaskItem> load_task_items(const fs::path& jsonl, const ModelConfig& model, bool qa) {
  const auto rows = read_jsonl(jsonl);
  require(!rows.empty(), ErrorKind::EmptyCorpus, jsonl.string() + ": no rows");
  std::vector<TaskItem> items(rows.size());
  const fs::path base = jsonl.parent_path();
  try {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Json& r = rows[i];
      TaskItem& it = items[i];
      it.id = r.value("id", std::to_string(i));
      it.image = load_model_image(base / r.at("image").get<std::string>(), model);
      it.split = r.value("split", std::string{"train"});
      if (qa) {
        it.mask = decode_rle(r.at("mask").get<std::string>());
        require(it.mask.grid() == model.grid(), ErrorKind::ShapeMismatch,
                jsonl.string() + ": mask grid does not match the model");
      } else {
        it.label = r.at("label").get<int>();
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, jsonl.string() + ": " + e.what());
  }
  return items;
}

}  // namespace pixeldoc::cli
