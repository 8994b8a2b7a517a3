#include "inpaint/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "inpaint/errors.hpp"
#include "inpaint/ops.hpp"
#include "json_fields.hpp"

namespace inpaint {

namespace {

namespace jf = json_fields;

constexpr std::uint64_t kLabelStream = 2;
constexpr std::uint64_t kDiscriminatorSeedSalt = 0x9e3779b97f4a7c15ull;

Rng stream_rng(std::uint64_t seed, std::int64_t step, std::uint64_t stream) {
  const auto s = static_cast<std::uint64_t>(step);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(stream), 0x7a11u};
  return Rng(seq);
}

// Restores trainability of a module's parameters on scope exit.
class FreezeGuard {
 public:
  explicit FreezeGuard(Module& m) : m_(m) { m_.set_trainable(false); }
  ~FreezeGuard() { m_.set_trainable(true); }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  Module& m_;
};

std::vector<std::string> stage_losses(const StageSpec& s) {
  std::vector<std::string> out;
  if (s.reconstruction) out.push_back("reconstruction");
  if (s.adversarial) out.push_back("adversarial");
  if (s.perceptual) out.push_back("perceptual");
  return out;
}

void stage_from_json(const nlohmann::json& j, StageSpec& s) {
  jf::read(j, "name", s.name);
  jf::require(j, "steps", s.steps);
  std::vector<std::string> losses;
  jf::require(j, "losses", losses);
  s.reconstruction = s.adversarial = s.perceptual = false;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] == "reconstruction") {
      s.reconstruction = true;
    } else if (losses[i] == "adversarial") {
      s.adversarial = true;
    } else if (losses[i] == "perceptual") {
      s.perceptual = true;
    } else {
      throw ConfigError("/losses/" + std::to_string(i) + ": unknown loss \"" + losses[i] +
                        "\" (expected reconstruction, adversarial or perceptual)");
    }
  }
}

template <class Fn>
void with_prefix(const std::string& prefix, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  }
}

Scalar global_norm(const Module& m) {
  Scalar s = 0;
  for (const auto& p : m.named_parameters()) {
    for (Scalar g : p.var.grad().values()) s += g * g;
  }
  return std::sqrt(s);
}

std::string format_scalar(Scalar v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::filesystem::path default_home() {
  if (const char* home = std::getenv("INPAINT_LAB_HOME"); home && *home) return home;
  return ".inpaint_lab";
}

std::vector<StageSpec> TrainConfig::resolved_stages() const {
  if (!stages.empty()) return stages;
  const int recon = std::max(1, static_cast<int>(std::lround(0.3 * total_steps)));
  std::vector<StageSpec> out{{"reconstruction", true, false, false, recon}};
  if (total_steps - recon >= 1) out.push_back({"hybrid", true, true, true, total_steps - recon});
  return out;
}

int TrainConfig::total() const {
  int t = 0;
  for (const auto& s : resolved_stages()) t += s.steps;
  return t;
}

bool TrainConfig::uses_adversarial() const {
  const auto s = resolved_stages();
  return std::any_of(s.begin(), s.end(), [](const StageSpec& st) { return st.adversarial; });
}

bool TrainConfig::uses_perceptual() const {
  const auto s = resolved_stages();
  return std::any_of(s.begin(), s.end(), [](const StageSpec& st) { return st.perceptual; });
}

void TrainConfig::validate() const {
  if (!(lr_end > 0) || !std::isfinite(lr_end)) throw ConfigError("/lr_end: must be > 0");
  if (!(lr_start > lr_end) || !std::isfinite(lr_start)) {
    throw ConfigError("/lr_end: must be smaller than lr_start (" + format_scalar(lr_end) +
                      " >= " + format_scalar(lr_start) + ")");
  }
  if (!(decay_power > 0)) throw ConfigError("/decay_power: must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("/adam/beta1: must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("/adam/beta2: must lie in [0, 1)");
  if (!(adam.eps > 0)) throw ConfigError("/adam/eps: must be > 0");
  if (batch_size < 1) throw ConfigError("/batch_size: must be >= 1");
  if (stages.empty() && total_steps < 1) throw ConfigError("/total_steps: must be >= 1");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string at = "/stages/" + std::to_string(i);
    if (stages[i].steps < 1) throw ConfigError(at + "/steps: must be >= 1");
    if (!stages[i].reconstruction && !stages[i].adversarial && !stages[i].perceptual) {
      throw ConfigError(at + "/losses: at least one loss must be active");
    }
  }
  if (warmup_balance_steps < 0) throw ConfigError("/warmup_balance_steps: must be >= 0");
  if (!(rho_adversarial >= 0)) throw ConfigError("/target_ratios/adversarial: must be >= 0");
  if (!(rho_perceptual >= 0)) throw ConfigError("/target_ratios/perceptual: must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("/checkpoint_every: must be >= 0");
  if (prefetch < 0) throw ConfigError("/prefetch: must be >= 0");

  with_prefix("/generator", [&] { generator.validate(); });
  with_prefix("/dataset", [&] { dataset.validate(); });
  with_prefix("/loss", [&] { loss.validate(); });
  const int side = dataset.synthetic ? dataset.synthetic->size : dataset.target_size;
  if (dataset.synthetic && dataset.synthetic->size != dataset.target_size) {
    throw ConfigError("/dataset/target_size: must equal synthetic.size (" + std::to_string(side) + ")");
  }
  if (side % generator.resolution_multiple() != 0) {
    throw ConfigError("/dataset/target_size: must be a multiple of " +
                      std::to_string(generator.resolution_multiple()) + " for a " +
                      std::to_string(generator.levels) + "-level generator");
  }
  with_prefix("/mask", [&] { mask.validate(side, side); });
  if (uses_adversarial()) {
    with_prefix("/discriminator", [&] { discriminator.validate(); });
    if (discriminator.input_size != side) {
      throw ConfigError("/discriminator/input_size: must equal the training resolution " +
                        std::to_string(side));
    }
  }
  if (uses_perceptual()) {
    with_prefix("/perceptual", [&] { perceptual.validate(); });
    if (loss.alpha.size() != perceptual.layer_taps.size()) {
      throw ConfigError("/loss/alpha: expected " + std::to_string(perceptual.layer_taps.size()) +
                        " weights, one per perceptual layer tap");
    }
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : c.stages) {
    stages.push_back({{"name", s.name}, {"losses", stage_losses(s)}, {"steps", s.steps}});
  }
  j = {{"stages", stages},
       {"total_steps", c.total_steps},
       {"lr_start", c.lr_start},
       {"lr_end", c.lr_end},
       {"decay_power", c.decay_power},
       {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"warmup_balance_steps", c.warmup_balance_steps},
       {"target_ratios", {{"adversarial", c.rho_adversarial}, {"perceptual", c.rho_perceptual}}},
       {"replace_context", c.replace_context},
       {"checkpoint_every", c.checkpoint_every},
       {"output_dir", c.output_dir.string()},
       {"prefetch", c.prefetch},
       {"mask", {{"min_size", c.mask.min_size}, {"max_size", c.mask.max_size}}},
       {"generator", c.generator},
       {"discriminator", c.discriminator},
       {"perceptual", c.perceptual},
       {"loss", c.loss},
       {"dataset", c.dataset}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError(": expected an object");
  if (j.contains("stages")) {
    const auto& js = j["stages"];
    if (!js.is_array()) throw ConfigError("/stages: expected an array");
    c.stages.clear();
    for (std::size_t i = 0; i < js.size(); ++i) {
      StageSpec s;
      with_prefix("/stages/" + std::to_string(i), [&] { stage_from_json(js[i], s); });
      c.stages.push_back(s);
    }
  }
  jf::read(j, "total_steps", c.total_steps);
  jf::read(j, "lr_start", c.lr_start);
  jf::read(j, "lr_end", c.lr_end);
  jf::read(j, "decay_power", c.decay_power);
  if (j.contains("adam")) {
    jf::nested("adam", [&] {
      jf::read(j["adam"], "beta1", c.adam.beta1);
      jf::read(j["adam"], "beta2", c.adam.beta2);
      jf::read(j["adam"], "eps", c.adam.eps);
    });
  }
  jf::read(j, "batch_size", c.batch_size);
  jf::read(j, "seed", c.seed);
  jf::read(j, "warmup_balance_steps", c.warmup_balance_steps);
  if (j.contains("target_ratios")) {
    jf::nested("target_ratios", [&] {
      jf::read(j["target_ratios"], "adversarial", c.rho_adversarial);
      jf::read(j["target_ratios"], "perceptual", c.rho_perceptual);
    });
  }
  jf::read(j, "replace_context", c.replace_context);
  jf::read(j, "checkpoint_every", c.checkpoint_every);
  std::string out = c.output_dir.string();
  jf::read(j, "output_dir", out);
  c.output_dir = out;
  jf::read(j, "prefetch", c.prefetch);
  if (j.contains("mask")) {
    jf::nested("mask", [&] {
      jf::read(j["mask"], "min_size", c.mask.min_size);
      jf::read(j["mask"], "max_size", c.mask.max_size);
    });
  }
  jf::read(j, "dataset", c.dataset);
  jf::read(j, "generator", c.generator);
  const int side = c.dataset.synthetic ? c.dataset.synthetic->size : c.dataset.target_size;
  jf::read(j, "discriminator", c.discriminator);
  const bool has_input_size =
      j.contains("discriminator") && j["discriminator"].is_object() && j["discriminator"].contains("input_size");
  if (!has_input_size) c.discriminator.input_size = side;
  jf::read(j, "perceptual", c.perceptual);
  const bool has_alpha = j.contains("loss") && j["loss"].is_object() && j["loss"].contains("alpha");
  jf::read(j, "loss", c.loss);
  if (!has_alpha) c.loss.alpha = c.perceptual.layer_weights;
  c.validate();
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(": cannot read config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(": config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  TrainConfig c = j.get<TrainConfig>();
  const auto base = path.parent_path();
  if (!c.dataset.root.empty() && c.dataset.root.is_relative()) c.dataset.root = base / c.dataset.root;
  if (!c.output_dir.empty() && c.output_dir.is_relative()) c.output_dir = base / c.output_dir;
  if (!c.perceptual.weights_path.empty() && c.perceptual.weights_path.is_relative()) {
    c.perceptual.weights_path = base / c.perceptual.weights_path;
  }
  return c;
}

Scalar poly_lr(std::int64_t step, const TrainConfig& config) {
  const std::int64_t total = config.total();
  if (step <= 0) return config.lr_start;
  if (step >= total) return config.lr_end;
  const Scalar frac = 1 - static_cast<Scalar>(step) / static_cast<Scalar>(total);
  const Scalar lr =
      config.lr_end + (config.lr_start - config.lr_end) * std::pow(frac, config.decay_power);
  return std::clamp(lr, config.lr_end, config.lr_start);
}

Scalar median(std::vector<Scalar> values) {
  if (values.empty()) throw ValidationError("median of an empty series");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const Scalar upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const Scalar lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

Trainer::Trainer(TrainConfig config, DatasetSplits data)
    : config_((config.validate(), std::move(config))),
      stages_(config_.resolved_stages()),
      data_(std::make_shared<const DatasetSplits>(std::move(data))),
      sampler_(data_->train, SamplerOptions{config_.batch_size, config_.mask, true, true, config_.seed}),
      generator_(config_.generator, config_.seed),
      discriminator_(config_.discriminator, config_.seed ^ kDiscriminatorSeedSalt),
      adam_g_(generator_.named_parameters(), config_.adam),
      adam_d_(discriminator_.named_parameters(), config_.adam) {
  if (data_->train.target_size() != config_.dataset.target_size) {
    throw ConfigError("/dataset/target_size: dataset does not match the config");
  }
  if (config_.uses_perceptual()) {
    extractor_ = load_backbone(config_.perceptual);
    const int m = extractor_->required_multiple();
    if (config_.dataset.target_size % m != 0) {
      throw ConfigError("/perceptual/layer_taps: deepest tap needs a resolution multiple of " +
                        std::to_string(m));
    }
  }
  state_.lambda1 = config_.loss.lambda1;
  state_.lambda2 = config_.loss.lambda2;
}

int Trainer::stage_at(std::int64_t step) const {
  std::int64_t end = 0;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    end += stages_[i].steps;
    if (step < end) return static_cast<int>(i);
  }
  return static_cast<int>(stages_.size()) - 1;
}

std::vector<Scalar> Trainer::labels(LabelKind kind, int n, std::int64_t step) const {
  if (!config_.loss.label_smoothing) return std::vector<Scalar>(n, kind == LabelKind::kReal ? 1.0 : 0.0);
  Rng rng = stream_rng(config_.seed, step, kLabelStream + (kind == LabelKind::kFake ? 1 : 0));
  return smooth_labels(kind, n, rng, config_.loss);
}

Var Trainer::fake_images(const Var& generated, const CompletionBatch& batch) const {
  return config_.replace_context ? compose(generated, batch.gt, batch.mask) : generated;
}

Scalar Trainer::train_step_d(const CompletionBatch& batch) {
  Tensor fake;
  {
    NoGradGuard ng;
    const Var gen = generator_.forward(Var(batch.input4), BatchNormMode::kTrainFrozen);
    fake = fake_images(gen, batch).value();
  }
  const int n = batch.size();
  const std::int64_t step = state_.global_step;
  const Var real_logits = discriminator_.forward(Var(batch.gt), BatchNormMode::kTrain);
  const Var fake_logits = discriminator_.forward(Var(fake), BatchNormMode::kTrain);
  const auto yr = labels(LabelKind::kReal, n, step);
  const auto yf = labels(LabelKind::kFake, n, step);
  const Var loss = adversarial_d_loss(real_logits, fake_logits, yr, yf);
  const Scalar value = loss.item();
  if (!std::isfinite(value)) throw NumericError("discriminator loss is not finite");
  discriminator_.zero_grad();
  loss.backward();
  adam_d_.step(poly_lr(step, config_));
  return value;
}

LossRecord Trainer::train_step_g(const CompletionBatch& batch, const StageSpec& stage) {
  const Var gen = generator_.forward(Var(batch.input4), BatchNormMode::kTrain);
  Var lr_term, adv_term, perc_term;
  if (stage.reconstruction) lr_term = reconstruction_loss(gen, batch.gt, batch.mask);
  if (stage.adversarial) {
    FreezeGuard frozen(discriminator_);
    adv_term = adversarial_g_loss(discriminator_.forward(fake_images(gen, batch), BatchNormMode::kTrainFrozen));
  }
  if (stage.perceptual) perc_term = perceptual_loss(*extractor_, gen, batch.gt, batch.mask, config_.loss);

  LossRecord rec;
  rec.step = state_.global_step;
  rec.lr = poly_lr(state_.global_step, config_);
  if (lr_term.defined()) rec.reconstruction = lr_term.item();
  if (adv_term.defined()) rec.adversarial_g = adv_term.item();
  if (perc_term.defined()) rec.perceptual = perc_term.item();
  for (auto [v, name] : {std::pair{rec.reconstruction, "reconstruction"},
                         std::pair{rec.adversarial_g, "adversarial"},
                         std::pair{rec.perceptual, "perceptual"}}) {
    if (!std::isfinite(v)) throw NumericError(std::string(name) + " loss is not finite");
  }
  LossWeights w = config_.loss;
  w.lambda1 = state_.lambda1;
  w.lambda2 = state_.lambda2;
  const Var total = hybrid_loss(lr_term, adv_term, perc_term, w);
  generator_.zero_grad();
  total.backward();
  adam_g_.step(rec.lr);
  return rec;
}

Scalar Trainer::term_norm(const Var& loss) {
  generator_.zero_grad();
  loss.backward();
  const Scalar n = global_norm(generator_);
  generator_.zero_grad();
  return n;
}

TermNorms Trainer::measure_gradient_norms(const CompletionBatch& batch, const StageSpec& stage) {
  TermNorms out;
  FreezeGuard frozen(discriminator_);
  const Var gen = generator_.forward(Var(batch.input4), BatchNormMode::kTrainFrozen);
  out.reconstruction = term_norm(reconstruction_loss(gen, batch.gt, batch.mask));
  if (stage.adversarial) {
    const Var logits = discriminator_.forward(fake_images(gen, batch), BatchNormMode::kTrainFrozen);
    out.adversarial = term_norm(adversarial_g_loss(logits));
  }
  if (stage.perceptual) {
    out.perceptual = term_norm(perceptual_loss(*extractor_, gen, batch.gt, batch.mask, config_.loss));
  }
  return out;
}

BalanceReport Trainer::measure_window(const StageSpec& stage, std::uint64_t stream) {
  const int window = std::max(1, config_.warmup_balance_steps);
  const BatchSampler probe(data_->train,
                           SamplerOptions{config_.batch_size, config_.mask, true, true,
                                          config_.seed + stream * kDiscriminatorSeedSalt});
  BalanceReport r;
  for (int k = 0; k < window; ++k) {
    const TermNorms n = measure_gradient_norms(probe.batch_at(k), stage);
    r.g_r.push_back(n.reconstruction);
    if (stage.adversarial) r.g_a.push_back(n.adversarial);
    if (stage.perceptual) r.g_p.push_back(n.perceptual);
  }
  r.median_r = median(r.g_r);
  if (!r.g_a.empty()) r.median_a = median(r.g_a);
  if (!r.g_p.empty()) r.median_p = median(r.g_p);
  return r;
}

BalanceReport Trainer::balance_hyperparameters(const StageSpec& stage, std::uint64_t stream) {
  BalanceReport r = measure_window(stage, stream);
  if (!(r.median_r > 0)) {
    throw BalancingError("reconstruction gradient median is zero; the generator receives no signal");
  }
  r.lambda1 = state_.lambda1;
  r.lambda2 = state_.lambda2;
  if (stage.adversarial) {
    if (config_.rho_adversarial == 0) {
      r.lambda1 = 0;
    } else if (!(r.median_a > 0)) {
      throw BalancingError("adversarial gradient median is zero; the loss path is dead");
    } else {
      r.lambda1 = config_.rho_adversarial * r.median_r / r.median_a;
    }
  }
  if (stage.perceptual) {
    if (config_.rho_perceptual == 0) {
      r.lambda2 = 0;
    } else if (!(r.median_p > 0)) {
      throw BalancingError("perceptual gradient median is zero; the loss path is dead");
    } else {
      r.lambda2 = config_.rho_perceptual * r.median_r / r.median_p;
    }
  }
  state_.lambda1 = r.lambda1;
  state_.lambda2 = r.lambda2;
  state_.balanced = true;
  state_.balance = r;
  return r;
}

LossRecord Trainer::step() {
  const std::int64_t s = state_.global_step;
  const int stage_index = stage_at(s);
  const StageSpec& stage = stages_[stage_index];
  if ((stage.adversarial || stage.perceptual) && !state_.balanced) {
    if (config_.warmup_balance_steps > 0) {
      // Every term used anywhere in the schedule is balanced at once.
      StageSpec probe = stage;
      probe.adversarial = config_.uses_adversarial();
      probe.perceptual = config_.uses_perceptual();
      balance_hyperparameters(probe);
    } else {
      state_.balanced = true;
    }
  }
  const CompletionBatch batch = prefetch_ ? prefetch_->pop() : sampler_.batch_at(s);
  const Scalar d_loss = stage.adversarial ? train_step_d(batch) : 0.0;
  LossRecord rec = train_step_g(batch, stage);
  rec.stage = stage_index;
  rec.adversarial_d = d_loss;
  state_.history.push_back(rec);
  ++state_.global_step;
  return rec;
}

void Trainer::run(std::optional<std::int64_t> until,
                  const std::function<void(const LossRecord&)>& on_step) {
  const std::int64_t end = std::min<std::int64_t>(until.value_or(config_.total()), config_.total());
  if (config_.prefetch > 0 && state_.global_step < end) {
    prefetch_ = std::make_unique<Prefetcher>(sampler_, state_.global_step, config_.prefetch);
  }
  try {
    while (state_.global_step < end) {
      const LossRecord rec = step();
      if (on_step) on_step(rec);
      if (config_.checkpoint_every > 0 && state_.global_step % config_.checkpoint_every == 0) {
        save_checkpoint();
      }
    }
  } catch (const NumericError& e) {
    prefetch_.reset();
    const std::string where = state_.last_checkpoint.empty()
                                  ? "no checkpoint written yet"
                                  : "last good checkpoint: " + state_.last_checkpoint.string();
    throw TrainingAborted("training aborted at step " + std::to_string(state_.global_step) + ": " +
                              e.what() + " (" + where + ")",
                          state_.last_checkpoint.string());
  }
  prefetch_.reset();
  save_checkpoint();
}

CheckpointData Trainer::checkpoint() const {
  CheckpointData d;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : state_.history) {
    history.push_back({r.step, r.stage, r.reconstruction, r.adversarial_g, r.adversarial_d,
                       r.perceptual, r.lr});
  }
  d.header = {{"config", config_},
              {"generator", config_.generator},
              {"state",
               {{"global_step", state_.global_step},
                {"lambda1", state_.lambda1},
                {"lambda2", state_.lambda2},
                {"balanced", state_.balanced},
                {"adam_g_steps", adam_g_.steps()},
                {"adam_d_steps", adam_d_.steps()}}},
              {"history", history}};
  if (state_.balance) {
    const auto& b = *state_.balance;
    d.header["balance"] = {{"g_r", b.g_r},           {"g_a", b.g_a},           {"g_p", b.g_p},
                           {"median_r", b.median_r}, {"median_a", b.median_a}, {"median_p", b.median_p},
                           {"lambda1", b.lambda1},   {"lambda2", b.lambda2}};
  }
  store_state(d, "G", generator_.state());
  store_state(d, "D", discriminator_.state());
  store_state(d, "adam_g", adam_g_.state());
  store_state(d, "adam_d", adam_d_.state());
  return d;
}

std::filesystem::path Trainer::save_checkpoint(const std::filesystem::path& path) {
  write_checkpoint(path, checkpoint());
  state_.last_checkpoint = path;
  return path;
}

std::filesystem::path Trainer::save_checkpoint() {
  const auto dir = config_.output_dir.empty() ? default_home() : config_.output_dir;
  char name[40];
  std::snprintf(name, sizeof(name), "step-%07lld.ckpt", static_cast<long long>(state_.global_step));
  const auto path = save_checkpoint(dir / "checkpoints" / name);
  std::filesystem::copy_file(path, dir / "model.ckpt", std::filesystem::copy_options::overwrite_existing);
  write_loss_log(dir / "loss_log.csv");
  if (state_.balance) {
    const auto& b = *state_.balance;
    std::ofstream out(dir / "balance.json");
    out << nlohmann::json{{"g_r", b.g_r},           {"g_a", b.g_a},           {"g_p", b.g_p},
                          {"median_r", b.median_r}, {"median_a", b.median_a}, {"median_p", b.median_p},
                          {"lambda1", b.lambda1},   {"lambda2", b.lambda2}}
               .dump(2)
        << "\n";
  }
  return path;
}

void Trainer::restore(const CheckpointData& data) {
  const auto& h = data.header;
  try {
    restore_state(data, "G", generator_.state());
    restore_state(data, "D", discriminator_.state());
    restore_state(data, "adam_g", adam_g_.state());
    restore_state(data, "adam_d", adam_d_.state());
    const auto& st = h.at("state");
    state_.global_step = st.at("global_step").get<std::int64_t>();
    state_.lambda1 = st.at("lambda1").get<Scalar>();
    state_.lambda2 = st.at("lambda2").get<Scalar>();
    state_.balanced = st.at("balanced").get<bool>();
    adam_g_.set_steps(st.at("adam_g_steps").get<std::int64_t>());
    adam_d_.set_steps(st.at("adam_d_steps").get<std::int64_t>());
    state_.history.clear();
    for (const auto& r : h.at("history")) {
      state_.history.push_back({r[0].get<std::int64_t>(), r[1].get<int>(), r[2].get<Scalar>(),
                                r[3].get<Scalar>(), r[4].get<Scalar>(), r[5].get<Scalar>(),
                                r[6].get<Scalar>()});
    }
    state_.balance.reset();
    if (h.contains("balance")) {
      const auto& b = h["balance"];
      BalanceReport r;
      r.g_r = b.at("g_r").get<std::vector<Scalar>>();
      r.g_a = b.at("g_a").get<std::vector<Scalar>>();
      r.g_p = b.at("g_p").get<std::vector<Scalar>>();
      r.median_r = b.at("median_r").get<Scalar>();
      r.median_a = b.at("median_a").get<Scalar>();
      r.median_p = b.at("median_p").get<Scalar>();
      r.lambda1 = b.at("lambda1").get<Scalar>();
      r.lambda2 = b.at("lambda2").get<Scalar>();
      state_.balance = r;
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint header is malformed: ") + e.what());
  }
}

void Trainer::write_loss_log(const std::filesystem::path& path) const {
  write_loss_csv(path, state_.history);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write loss log '" + path.string() + "'");
  out << "step,stage,L_r,L_a^G,L_a^D,L_p,lr\n";
  for (const auto& r : history) {
    out << r.step << ',' << r.stage << ',' << format_scalar(r.reconstruction) << ','
        << format_scalar(r.adversarial_g) << ',' << format_scalar(r.adversarial_d) << ','
        << format_scalar(r.perceptual) << ',' << format_scalar(r.lr) << '\n';
  }
}

Trainer resume_trainer(const std::filesystem::path& checkpoint, std::optional<DatasetSplits> data) {
  const CheckpointData ck = read_checkpoint(checkpoint);
  if (!ck.header.contains("config")) {
    throw LoadError("checkpoint '" + checkpoint.string() + "' has no training config; it cannot be resumed");
  }
  TrainConfig config;
  try {
    config = ck.header["config"].get<TrainConfig>();
  } catch (const ConfigError& e) {
    throw LoadError("checkpoint '" + checkpoint.string() + "' embeds an invalid config: " + e.what());
  }
  Trainer t(config, data ? std::move(*data) : ingest_dataset(config.dataset));
  t.restore(ck);
  t.mutable_state().last_checkpoint = checkpoint;
  return t;
}

}  // namespace inpaint
