// signsym: pretrain / finetune / attack / report / run over one config file.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "signsym/errors.hpp"
#include "signsym/harness.hpp"

namespace fs = std::filesystem;
using namespace signsym;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value experiment config")->required();
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--out-dir", c.out_dir, "checkpoint and record directory")->capture_default_str();
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  cfg.data.blobs.seed = cfg.seed;
  cfg.validate();
  fs::create_directories(c.out_dir);
  return cfg;
}

std::string in_dir(const Common& c, const std::string& file) { return (fs::path(c.out_dir) / file).string(); }

void cmd_pretrain(const Common& c) {
  const auto cfg = resolve(c);
  const auto ckpt = pretrain_stage(cfg, load_train(cfg));
  save_checkpoint(in_dir(c, "pretrained.ckpt"), ckpt);
  std::cout << "wrote " << in_dir(c, "pretrained.ckpt") << '\n';
}

void cmd_finetune(const Common& c) {
  const auto cfg = resolve(c);
  const auto pretrained = load_checkpoint(in_dir(c, "pretrained.ckpt"));
  const auto train = load_train(cfg);
  for (auto rule : cfg.finetune_rules) {
    const auto path = in_dir(c, checkpoint_name(rule));
    save_checkpoint(path, finetune_stage(cfg, pretrained, rule, train));
    std::cout << "wrote " << path << '\n';
  }
}

void cmd_attack(const Common& c) {
  const auto cfg = resolve(c);
  const auto train = load_train(cfg);
  const auto test = load_test(cfg);
  std::vector<RunRecord> records;
  for (auto rule : cfg.finetune_rules) {
    const auto part = attack_stage(cfg, load_checkpoint(in_dir(c, checkpoint_name(rule))), train, test);
    records.insert(records.end(), part.begin(), part.end());
  }
  emit_csv(records, in_dir(c, "records.csv"));
  std::cout << "wrote " << in_dir(c, "records.csv") << " (" << records.size() << " records)\n";
}

void report(const std::string& out_dir) {
  const auto records = read_csv((fs::path(out_dir) / "records.csv").string());
  std::map<std::string, std::vector<RunRecord>> by_attack;
  for (const auto& r : records) by_attack[r.attack].push_back(r);
  for (const auto& [attack, rows] : by_attack) {
    const auto path = (fs::path(out_dir) / ("robust-" + attack + ".svg")).string();
    emit_svg_plot(rows, path);
    std::cout << "wrote " << path << '\n';
  }
  std::cout << "rule,attack,epsilon,clean,robust\n";
  for (const auto& r : records)
    std::cout << r.rule << ',' << r.attack << ',' << r.epsilon << ',' << r.clean << ',' << r.robust << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sign-symmetric feedback training and adversarial evaluation"};
  app.require_subcommand(1);
  Common common;
  std::string report_dir = "out";

  auto* pre = app.add_subcommand("pretrain", "train backbone + classifier head from scratch");
  add_common(pre, common);
  auto* fine = app.add_subcommand("finetune", "fresh head, fine-tune with every configured rule");
  add_common(fine, common);
  auto* att = app.add_subcommand("attack", "attack every fine-tuned checkpoint, write records.csv");
  add_common(att, common);
  auto* run = app.add_subcommand("run", "pretrain, finetune, attack and report in one process");
  add_common(run, common);
  auto* rep = app.add_subcommand("report", "plot records.csv as one SVG per attack");
  rep->add_option("--out-dir", report_dir, "directory holding records.csv")->capture_default_str();
  rep->add_option("--config", common.config_path, "ignored; accepted for symmetry");
  rep->add_option("--seed", common.seed, "ignored; accepted for symmetry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (pre->parsed()) cmd_pretrain(common);
    if (fine->parsed()) cmd_finetune(common);
    if (att->parsed()) cmd_attack(common);
    if (run->parsed()) {
      const auto cfg = resolve(common);
      run_pipeline(cfg, common.out_dir);
      report(common.out_dir);
    }
    if (rep->parsed()) report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
