#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "signsym/attacks.hpp"
#include "signsym/checkpoint.hpp"
#include "signsym/datasets.hpp"
#include "signsym/feedback.hpp"

namespace signsym {

enum class Task : std::uint8_t { classification, hashing };

/// Which backward transport a white-box attacker uses to get ∇ₓ: exact
/// backprop, or the rule the model was fine-tuned with.
enum class AttackTransport : std::uint8_t { backprop, deployed };

struct ExperimentConfig {
  Task task = Task::classification;
  DatasetSource data;
  std::string model = "conv4x3,pool,conv8x3,pool,flatten,dense32";
  FeedbackRule pretrain_rule = FeedbackRule::bp;
  std::vector<FeedbackRule> finetune_rules = {FeedbackRule::bp, FeedbackRule::usf, FeedbackRule::frsf,
                                              FeedbackRule::brsf};
  std::size_t pretrain_epochs = 3;
  std::size_t finetune_epochs = 5;
  std::size_t batch_size = 32;
  double lr_pretrain = 1e-3;
  double lr_backbone = 1e-5;
  double lr_head = 1e-4;
  std::vector<AttackFamily> attacks = {AttackFamily::fgsm, AttackFamily::pgd};
  std::vector<double> epsilons = {0, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5};
  double alpha_ratio = 1.0 / 3.0;  // α = ε · ratio
  std::size_t attack_steps = 5;
  std::size_t query_budget = 1000;
  std::size_t eval_count = 500;
  std::size_t train_limit = 0;  // 0 = whole train split
  std::size_t code_bits = 32;
  std::size_t map_k = 5000;
  AttackTransport transport = AttackTransport::backprop;
  std::uint64_t seed = 0;

  /// Throws ConfigError for any inconsistency, before any training starts.
  void validate() const;
};

/// "key = value" lines; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a over the canonical form without the seed.
std::string config_hash(const ExperimentConfig& cfg);

struct RunRecord {
  std::string config_hash;
  std::string rule;
  std::string attack;
  double epsilon = 0;
  double clean = 0;
  double robust = 0;
  std::size_t n_eval = 0;
  double wall_time_s = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline constexpr std::string_view kCsvHeader = "config_hash,rule,attack,epsilon,clean,robust,n_eval,wall_time_s,seed";

std::string records_to_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_csv(std::string_view text);
void emit_csv(const std::vector<RunRecord>& records, const std::string& path);
std::vector<RunRecord> read_csv(const std::string& path);

/// One polyline per rule; ε on a log x-axis (ε = 0 drawn one decade left of
/// the smallest positive ε), metric on y ∈ [0, 1].
std::string records_to_svg(const std::vector<RunRecord>& records, std::string_view title);
void emit_svg_plot(const std::vector<RunRecord>& records, const std::string& path);

// --- pipeline stages -------------------------------------------------------

Dataset load_train(const ExperimentConfig& cfg);
Dataset load_test(const ExperimentConfig& cfg);

/// Stage 1: backbone + classifier head trained from scratch with the
/// pretraining rule.
Checkpoint pretrain_stage(const ExperimentConfig& cfg, const Dataset& train);

/// Stage 2: fresh task head, then all weights fine-tuned with `rule` at the
/// backbone/head learning rates. The checkpoint carries the feedback state.
Checkpoint finetune_stage(const ExperimentConfig& cfg, const Checkpoint& pretrained, FeedbackRule rule,
                          const Dataset& train);

/// Stage 3: clean and robust metric for every attack × ε on the seeded
/// evaluation subset. `database` is the retrieval database (hashing only).
std::vector<RunRecord> attack_stage(const ExperimentConfig& cfg, const Checkpoint& finetuned, const Dataset& database,
                                    const Dataset& test);

/// The seeded evaluation rows drawn from the test split.
std::vector<std::size_t> evaluation_rows(const ExperimentConfig& cfg, std::size_t test_size);

struct PipelineResult {
  std::vector<RunRecord> records;
  Checkpoint pretrained;
  std::vector<Checkpoint> finetuned;  // one per finetune rule
};

/// Full pretrain → fine-tune → attack sweep. When out_dir is non-empty the
/// checkpoints and records.csv are written there.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir = {});

std::string checkpoint_name(FeedbackRule rule);

/// Gradient access for white-box attacks under the configured transport.
GradientModel attack_model(const ExperimentConfig& cfg, const Checkpoint& ckpt);

/// Classification accuracy of `net` on (inputs, labels).
double accuracy(const Network& net, const Tensor& inputs, const std::vector<int>& labels);

}  // namespace signsym
