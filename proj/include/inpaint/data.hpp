#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "inpaint/imaging.hpp"

namespace inpaint {

enum class Recipe {
  kCelebA,      // random 160x160 crop, resized to the target size
  kStreetView,  // shorter side resized to the target, random square crop
  kGeneric,     // same as street view; for small or synthetic sets
};

std::string to_string(Recipe r);

struct AugmentSpec {
  Scalar flip_prob = 0.5;
  // Translation in pixels, uniform in [-max_shift, max_shift] per axis,
  // with mirrored borders.
  int max_shift = 8;
};

// Procedural texture images generated in memory instead of read from disk.
struct SyntheticSpec {
  int train_count = 8;
  int test_count = 4;
  int size = 32;
  std::uint64_t seed = 0;
};

struct DatasetSpec {
  std::filesystem::path root;
  Recipe recipe = Recipe::kGeneric;
  // Newline-delimited paths relative to root. When both are empty every
  // image in root is used for both splits.
  std::filesystem::path train_split;
  std::filesystem::path test_split;
  int target_size = 128;
  AugmentSpec augment;
  std::uint64_t seed = 0;
  std::optional<SyntheticSpec> synthetic;

  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetSpec& s);
void from_json(const nlohmann::json& j, DatasetSpec& s);

// One split of a dataset: a sorted list of sources and the recipe that turns
// each into a signed target_size x target_size image.
class Dataset {
 public:
  Dataset() = default;

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const { return ids_; }
  Recipe recipe() const { return recipe_; }
  int target_size() const { return target_size_; }
  const AugmentSpec& augment() const { return augment_; }

  // Decoded source image, raw range.
  ImageTensor raw(std::size_t i) const;
  // Recipe output. rng == nullptr selects the deterministic center crop
  // used at test time.
  ImageTensor preprocessed(std::size_t i, Rng* rng) const;

 private:
  friend struct DatasetBuilder;

  std::filesystem::path root_;
  std::vector<std::string> ids_;
  std::vector<ImageTensor> memory_;  // synthetic images, indexed like ids_
  Recipe recipe_ = Recipe::kGeneric;
  int target_size_ = 128;
  AugmentSpec augment_;
};

struct DatasetSplits {
  Dataset train;
  Dataset test;
};

// Lists and checks every file. Overlapping split lists raise
// ValidationError; unreadable or undecodable files raise IngestionError
// naming all offending paths.
DatasetSplits ingest_dataset(const DatasetSpec& spec);

// Recipes on raw images. rng == nullptr gives center crops.
ImageTensor preprocess_celeba(const ImageTensor& raw, Rng* rng, int target_size = 128);
ImageTensor preprocess_streetview(const ImageTensor& raw, Rng* rng, int target_size = 128);
ImageTensor preprocess_generic(const ImageTensor& raw, Rng* rng, int target_size = 128);
ImageTensor preprocess(Recipe recipe, const ImageTensor& raw, Rng* rng, int target_size);

// Random horizontal flip and shift of a signed image.
ImageTensor augment(const ImageTensor& img, const AugmentSpec& spec, Rng& rng);

// Deterministic procedural RGB texture (raw range).
ImageTensor synthetic_texture(int size, std::uint64_t seed, std::uint64_t index);

// NCHW batch. gt and corrupted are signed RGB, mask is 0/1, input4 is the
// generator input (corrupted RGB + mask).
struct CompletionBatch {
  Tensor gt;
  Tensor corrupted;
  Tensor mask;
  Tensor input4;
  std::optional<Tensor> generated;
  std::vector<std::string> source_ids;

  int size() const { return gt.shape().n; }
  ImageTensor gt_image(int n) const;
  Mask mask_at(int n) const;
};

// Builds a batch from (gt, mask) pairs.
CompletionBatch assemble_batch(std::span<const ImageTensor> gt, std::span<const Mask> masks,
                               std::vector<std::string> ids = {});

// batch_size samples drawn uniformly with replacement, each independently
// augmented and masked.
CompletionBatch make_batch(const Dataset& dataset, int batch_size, const MaskSpec& mask_spec,
                           Rng& rng);

struct SamplerOptions {
  int batch_size = 16;
  MaskSpec mask_spec;
  bool augment = true;
  // When false, next() signals the end of data after one pass.
  bool repeat = true;
  std::uint64_t seed = 0;
};

// Walks the dataset in seeded per-epoch permutations. The batch for a given
// step depends only on (seed, step), so training can resume at any step
// without saved sampler state.
class BatchSampler {
 public:
  BatchSampler(const Dataset& dataset, SamplerOptions options);

  CompletionBatch batch_at(std::int64_t step) const;
  // Batch at the cursor, then advances it. Without repeat, returns nullopt
  // once every item has been served; the last batch may be short.
  std::optional<CompletionBatch> next();

  std::int64_t cursor() const { return cursor_; }
  void seek(std::int64_t step) { cursor_ = step; }
  const SamplerOptions& options() const { return options_; }
  const Dataset& dataset() const { return *dataset_; }

 private:
  std::size_t item_at(std::int64_t position) const;

  const Dataset* dataset_;
  SamplerOptions options_;
  std::int64_t cursor_ = 0;
  mutable std::int64_t cached_epoch_ = -1;
  mutable std::vector<std::size_t> permutation_;
};

// Produces sampler batches on a worker thread into a bounded queue. Since
// batches are pure functions of the step, output matches the sampler's.
class Prefetcher {
 public:
  Prefetcher(const BatchSampler& sampler, std::int64_t first_step, int depth);
  ~Prefetcher();
  Prefetcher(const Prefetcher&) = delete;
  Prefetcher& operator=(const Prefetcher&) = delete;

  CompletionBatch pop();

 private:
  void run();

  const BatchSampler& sampler_;
  std::int64_t next_step_;
  std::size_t depth_;
  std::deque<CompletionBatch> queue_;
  std::exception_ptr error_;
  bool stop_ = false;
  std::mutex mu_;
  std::condition_variable cv_;
  std::thread worker_;
};

}  // namespace inpaint
