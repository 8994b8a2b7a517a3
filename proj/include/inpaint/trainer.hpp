#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "inpaint/checkpoint.hpp"
#include "inpaint/data.hpp"
#include "inpaint/losses.hpp"
#include "inpaint/networks.hpp"
#include "inpaint/optim.hpp"
#include "inpaint/perceptual.hpp"

namespace inpaint {

struct StageSpec {
  std::string name;
  bool reconstruction = true;
  bool adversarial = false;
  bool perceptual = false;
  int steps = 1;
};

struct TrainConfig {
  // Empty: reconstruction for 30% of total_steps, then all three losses.
  std::vector<StageSpec> stages;
  int total_steps = 1000;
  Scalar lr_start = 1e-3;
  Scalar lr_end = 1e-6;
  Scalar decay_power = 1.0;
  AdamOptions adam;
  int batch_size = 16;
  std::uint64_t seed = 0;
  // Batches measured before the first adversarial or perceptual stage.
  // 0 keeps loss.lambda1 / loss.lambda2 as configured.
  int warmup_balance_steps = 50;
  Scalar rho_adversarial = 1.0;
  Scalar rho_perceptual = 1.0;
  // The discriminator judges the composition instead of the raw output.
  bool replace_context = true;
  // 0 writes a checkpoint only at the end.
  int checkpoint_every = 0;
  // Empty: default_home().
  std::filesystem::path output_dir;
  // Bounded batch queue depth; 0 produces batches on the training thread.
  int prefetch = 0;
  MaskSpec mask;
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  PerceptualSpec perceptual;
  LossWeights loss;
  DatasetSpec dataset;

  std::vector<StageSpec> resolved_stages() const;
  int total() const;
  bool uses_adversarial() const;
  bool uses_perceptual() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
// Reads a JSON config file; relative dataset roots and output directories
// resolve against the file's directory.
TrainConfig load_train_config(const std::filesystem::path& path);

// lr_end + (lr_start - lr_end) * (1 - step / total)^power. Steps outside
// [0, total] clamp to the endpoints, which are returned exactly.
Scalar poly_lr(std::int64_t step, const TrainConfig& config);

struct LossRecord {
  std::int64_t step = 0;
  int stage = 0;
  Scalar reconstruction = 0;
  Scalar adversarial_g = 0;
  Scalar adversarial_d = 0;
  Scalar perceptual = 0;
  Scalar lr = 0;
};

struct BalanceReport {
  std::vector<Scalar> g_r, g_a, g_p;  // per-batch global gradient norms
  Scalar median_r = 0, median_a = 0, median_p = 0;
  Scalar lambda1 = 0, lambda2 = 0;
};

struct TrainState {
  std::int64_t global_step = 0;
  Scalar lambda1 = 0;
  Scalar lambda2 = 0;
  bool balanced = false;
  std::vector<LossRecord> history;
  std::optional<BalanceReport> balance;
  std::filesystem::path last_checkpoint;
};

Scalar median(std::vector<Scalar> values);

// Gradient norms of each loss term measured on one batch.
struct TermNorms {
  Scalar reconstruction = 0;
  Scalar adversarial = 0;
  Scalar perceptual = 0;
};

class Trainer {
 public:
  Trainer(TrainConfig config, DatasetSplits data);

  const TrainConfig& config() const { return config_; }
  const TrainState& state() const { return state_; }
  TrainState& mutable_state() { return state_; }
  Generator& generator() { return generator_; }
  const Generator& generator() const { return generator_; }
  Discriminator& discriminator() { return discriminator_; }
  const FeatureExtractor* perceptual_extractor() const {
    return extractor_ ? &*extractor_ : nullptr;
  }
  const Dataset& train_data() const { return data_->train; }
  const BatchSampler& sampler() const { return sampler_; }

  // Stage index for a global step.
  int stage_at(std::int64_t step) const;

  // One discriminator update. Generator parameters and statistics are not
  // touched. Returns L_a^D.
  Scalar train_step_d(const CompletionBatch& batch);
  // One generator update on the stage's active terms; the discriminator and
  // the perceptual backbone are not touched. Inactive terms report 0.
  LossRecord train_step_g(const CompletionBatch& batch, const StageSpec& stage);

  // Per-term generator gradient norms with every weight at 1. No parameter
  // or statistic changes.
  TermNorms measure_gradient_norms(const CompletionBatch& batch, const StageSpec& stage);
  // Norms over `warmup_balance_steps` batches of a separate seeded stream,
  // with medians; lambdas in the report are left at 0.
  BalanceReport measure_window(const StageSpec& stage, std::uint64_t stream);
  // Measures `warmup_balance_steps` batches from the given stream and sets
  // lambda1 = rho_a * median(g_r) / median(g_a), likewise lambda2.
  BalanceReport balance_hyperparameters(const StageSpec& stage, std::uint64_t stream = 1);

  // One full training step at state().global_step: balancing if due, the
  // D step when adversarial, the G step. Appends one history record.
  LossRecord step();
  // Runs until `until` (default: the end of the schedule), checkpointing
  // per config. Throws TrainingAborted on a non-finite loss.
  void run(std::optional<std::int64_t> until = std::nullopt,
           const std::function<void(const LossRecord&)>& on_step = {});

  CheckpointData checkpoint() const;
  std::filesystem::path save_checkpoint(const std::filesystem::path& path);
  std::filesystem::path save_checkpoint();
  // Restores weights, optimizer moments, lambdas, history and step.
  void restore(const CheckpointData& data);

  void write_loss_log(const std::filesystem::path& path) const;

 private:
  Scalar term_norm(const Var& loss);
  std::vector<Scalar> labels(LabelKind kind, int n, std::int64_t step) const;
  Var fake_images(const Var& generated, const CompletionBatch& batch) const;

  TrainConfig config_;
  std::vector<StageSpec> stages_;
  // Heap-held so the sampler's reference survives moves of the trainer.
  std::shared_ptr<const DatasetSplits> data_;
  BatchSampler sampler_;
  Generator generator_;
  Discriminator discriminator_;
  std::optional<FeatureExtractor> extractor_;
  Adam adam_g_;
  Adam adam_d_;
  TrainState state_;
  std::unique_ptr<Prefetcher> prefetch_;
};

// Builds a trainer from a checkpoint written by save_checkpoint. The
// embedded config is used; the dataset is ingested again.
Trainer resume_trainer(const std::filesystem::path& checkpoint,
                       std::optional<DatasetSplits> data = std::nullopt);

// $INPAINT_LAB_HOME, or ".inpaint_lab" when unset. Default location of
// training outputs and of the checkpoint used for inference.
std::filesystem::path default_home();

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history);

}  // namespace inpaint
