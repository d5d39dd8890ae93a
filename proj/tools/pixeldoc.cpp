#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "cli.hpp"
#include "pixeldoc/checkpoint.hpp"
#include "pixeldoc/errors.hpp"

using namespace pixeldoc;
using namespace pixeldoc::cli;

namespace {

// flag spellings that map onto config keys; "*" entries depend on the command
const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> a = {
      {"out", "paths.output"},       {"output", "paths.output"},     {"ckpt", "paths.checkpoint"},
      {"checkpoint", "paths.checkpoint"}, {"corpus", "paths.corpus"}, {"manifest", "paths.manifest"},
      {"dataset", "paths.manifest"}, {"scans", "paths.scans"},       {"pages", "paths.pages"},
      {"index", "paths.index"},      {"probe", "paths.probe"},       {"image", "paths.probe"},
      {"predictions", "paths.predictions"}, {"steps", "optim.steps"}, {"lr", "optim.lr"},
      {"batch", "optim.batch"},      {"warmup", "optim.warmup"},     {"window", "corpus.window"},
      {"stride", "corpus.stride"},   {"val_frac", "corpus.val_fraction"}, {"ocr", "qa.ocr"},
      {"threshold", "qa.threshold"}, {"balance", "qa.balance"},      {"n", "*.n"},
      {"noisy", "*.noisy"}};
  return a;
}

std::string resolve_key(std::string key, const std::string& command) {
  std::replace(key.begin(), key.end(), '-', '_');
  const auto it = aliases().find(key);
  if (it == aliases().end()) return key;
  if (!it->second.starts_with("*.")) return it->second;
  const std::string field = it->second.substr(2);
  if ((command == "synth" || command == "pretrain") && field == "n") return "synth.n";
  if (command.starts_with("seq") || command == "finetune seq") return "seq." + field;
  return "qa." + field;
}

// "--key value", "--key=value", "-k value"; a flag without value means true
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    require(a.size() > 1 && a[0] == '-', ErrorKind::UsageError, "unexpected argument '" + a + "'");
    std::string key = a.substr(a.starts_with("--") ? 2 : 1);
    std::string value = "true";
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else if (i + 1 < args.size() && !(args[i + 1].starts_with("--") ||
                                         (args[i + 1].size() == 2 && args[i + 1][0] == '-' && std::isalpha(args[i + 1][1])))) {
      value = args[++i];
    }
    out.emplace_back(key, value);
  }
  return out;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UsageError:
    case ErrorKind::ConfigInvalid:
      return 2;
    case ErrorKind::NonFiniteLoss:
      return 4;
    default:
      return 3;
  }
}

int report(const std::string& kind, int code, const std::string& message) {
  std::cerr << Json{{"error", kind}, {"exit", code}, {"message", message}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("pixeldoc"));
  spdlog::set_pattern("[%l] %v");
  CLI::App app{"pixeldoc: synthetic scans, pixel language model training, QA and search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.3.0");

  std::string config_file;
  std::string command;
  std::vector<CLI::App*> leaves;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& full, const std::string& help) {
    CLI::App* sub = parent->add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", config_file, "JSON config file; flags override it");
    sub->callback([&command, full] { command = full; });
    leaves.push_back(sub);
    return sub;
  };
  auto group = [&](const std::string& name, const std::string& help) {
    CLI::App* g = app.add_subcommand(name, help);
    g->require_subcommand(1);
    return g;
  };

  leaf(&app, "synth", "synth", "render (and degrade) a synthetic scan dataset");
  leaf(group("corpus", "page corpus tools"), "ingest", "corpus ingest", "linearize pages and cut sliding-window crops");
  leaf(&app, "pretrain", "pretrain", "masked-autoencoder pretraining");
  CLI::App* finetune = group("finetune", "task finetuning");
  leaf(finetune, "seq", "finetune seq", "sequence classification head");
  leaf(finetune, "qa", "finetune qa", "patch classification head for QA");
  leaf(group("eval", "evaluation"), "qa", "eval qa", "QA metrics for a checkpoint or prediction file");
  leaf(&app, "mask-preview", "mask-preview", "draw a span mask over an image");
  leaf(&app, "embed", "embed", "embed scans into a search index");
  leaf(&app, "search", "search", "nearest scans for a probe image");
  leaf(&app, "recon-dump", "recon-dump", "original / masked / reconstruction triptych");
  CLI::App* qa = group("qa", "QA datasets");
  leaf(qa, "build", "qa build", "build a synthetic QA dataset");
  leaf(qa, "eval", "eval qa", "same as 'eval qa'");
  leaf(group("seq", "sequence task datasets"), "build", "seq build", "build a synthetic sentence-pair dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::vector<std::string> extras;
  for (CLI::App* l : leaves)
    if (l->parsed()) extras = l->remaining();

  try {
    Context ctx;
    ctx.command = command;
    Json tree = to_json(RunConfig{});
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      require(in.good(), ErrorKind::ConfigInvalid, "--config: cannot open " + config_file);
      Json user;
      try {
        user = Json::parse(in);
      } catch (const Json::exception& e) {
        fail(ErrorKind::ConfigInvalid, config_file + ": " + e.what());
      }
      if (user.contains("config") && user.contains("command")) user = user["config"];  // a run.json replays
      merge_config(tree, user);
    }
    for (const auto& [key, value] : parse_overrides(extras)) set_config_value(tree, resolve_key(key, command), value);
    ctx.cfg = run_config_from_json(tree);
    ctx.resolved = to_json(ctx.cfg);
    ctx.threads = default_threads();

    static const std::map<std::string, int (*)(const Context&)> table = {
        {"synth", cmd_synth},           {"corpus ingest", cmd_corpus_ingest}, {"pretrain", cmd_pretrain},
        {"finetune seq", cmd_finetune_seq}, {"finetune qa", cmd_finetune_qa}, {"eval qa", cmd_eval_qa},
        {"mask-preview", cmd_mask_preview}, {"embed", cmd_embed},           {"search", cmd_search},
        {"recon-dump", cmd_recon_dump}, {"qa build", cmd_qa_build},       {"seq build", cmd_seq_build}};
    return table.at(command)(ctx);
  } catch (const Error& e) {
    return report(std::string(to_string(e.kind())), exit_code(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report("Io", 3, e.what());
  } catch (const std::exception& e) {
    return report("Internal", 3, e.what());
  }
}
