#include "inpaint/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "inpaint/errors.hpp"
#include "inpaint/image_io.hpp"
#include "json_fields.hpp"

namespace inpaint {

namespace jf = json_fields;

struct DatasetBuilder {
  static Dataset make(const DatasetSpec& spec, std::vector<std::string> ids,
                      std::vector<ImageTensor> memory = {}) {
    Dataset d;
    d.root_ = spec.root;
    d.ids_ = std::move(ids);
    d.memory_ = std::move(memory);
    d.recipe_ = spec.recipe;
    d.target_size_ = spec.target_size;
    d.augment_ = spec.augment;
    return d;
  }
};

namespace {

constexpr int kCelebACrop = 160;

Recipe parse_recipe(const std::string& s) {
  if (s == "celeba") return Recipe::kCelebA;
  if (s == "streetview") return Recipe::kStreetView;
  if (s == "generic") return Recipe::kGeneric;
  throw ConfigError("/recipe: expected \"celeba\", \"streetview\" or \"generic\", got \"" + s + "\"");
}

ImageTensor crop(const ImageTensor& img, int top, int left, int h, int w) {
  std::vector<Scalar> v;
  v.reserve(static_cast<std::size_t>(h) * w * img.channels());
  for (int y = top; y < top + h; ++y)
    for (int x = left; x < left + w; ++x)
      for (int c = 0; c < img.channels(); ++c) v.push_back(img.at(y, x, c));
  return ImageTensor(h, w, img.channels(), img.range(), std::move(v));
}

// Offset of a side-`want` window in a side-`have` extent: uniform with rng,
// centered without.
int window_offset(int have, int want, Rng* rng) {
  if (!rng) return (have - want) / 2;
  std::uniform_int_distribution<int> d(0, have - want);
  return d(*rng);
}

ImageTensor square_crop(const ImageTensor& img, int side, Rng* rng) {
  const int top = window_offset(img.height(), side, rng);
  const int left = window_offset(img.width(), side, rng);
  return crop(img, top, left, side, side);
}

// Reads a split list; blank lines are ignored.
std::vector<std::string> read_split(const std::filesystem::path& root,
                                    const std::filesystem::path& list) {
  const auto path = list.is_absolute() ? list : root / list;
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read split list '" + path.string() + "'");
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("split list '" + path.string() + "' contains duplicate entries");
  }
  return ids;
}

std::vector<std::string> scan_directory(const std::filesystem::path& root) {
  std::vector<std::string> ids;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
      ids.push_back(std::filesystem::relative(e.path(), root).generic_string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void check_files(const std::filesystem::path& root, const std::vector<std::string>& ids) {
  std::vector<std::string> bad;
  for (const auto& id : ids) {
    const auto path = root / id;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec) || !is_decodable_image(path)) {
      bad.push_back(path.string());
    }
  }
  if (bad.empty()) return;
  std::string msg = std::to_string(bad.size()) + " unreadable or undecodable file(s):";
  const std::size_t shown = std::min<std::size_t>(bad.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + bad[i];
  if (shown < bad.size()) msg += "\n  ... and " + std::to_string(bad.size() - shown) + " more";
  throw IngestionError(msg);
}

Rng sample_rng(std::uint64_t seed, std::int64_t step, int item) {
  const auto s = static_cast<std::uint64_t>(step);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(item), 0x5a17u};
  return Rng(seq);
}

ImageTensor sample_image(const Dataset& data, std::size_t index, bool do_augment, Rng& rng) {
  ImageTensor img = data.preprocessed(index, &rng);
  if (do_augment) img = augment(img, data.augment(), rng);
  return img;
}

}  // namespace

std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::kCelebA: return "celeba";
    case Recipe::kStreetView: return "streetview";
    case Recipe::kGeneric: return "generic";
  }
  return "generic";
}

void DatasetSpec::validate() const {
  if (target_size < 1) throw ConfigError("/target_size: must be >= 1");
  if (!(augment.flip_prob >= 0 && augment.flip_prob <= 1)) {
    throw ConfigError("/augment/flip_prob: must lie in [0, 1]");
  }
  if (augment.max_shift < 0) throw ConfigError("/augment/max_shift: must be >= 0");
  if (synthetic) {
    if (synthetic->train_count < 1) throw ConfigError("/synthetic/train_count: must be >= 1");
    if (synthetic->test_count < 0) throw ConfigError("/synthetic/test_count: must be >= 0");
    if (synthetic->size < 1) throw ConfigError("/synthetic/size: must be >= 1");
  } else if (root.empty()) {
    throw ConfigError("/root: required unless a synthetic source is configured");
  }
}

void to_json(nlohmann::json& j, const DatasetSpec& s) {
  j = {{"root", s.root.string()},
       {"recipe", to_string(s.recipe)},
       {"train_split", s.train_split.string()},
       {"test_split", s.test_split.string()},
       {"target_size", s.target_size},
       {"augment", {{"flip_prob", s.augment.flip_prob}, {"max_shift", s.augment.max_shift}}},
       {"seed", s.seed}};
  if (s.synthetic) {
    j["synthetic"] = {{"train_count", s.synthetic->train_count},
                      {"test_count", s.synthetic->test_count},
                      {"size", s.synthetic->size},
                      {"seed", s.synthetic->seed}};
  }
}

void from_json(const nlohmann::json& j, DatasetSpec& s) {
  std::string root = s.root.string(), train = s.train_split.string(), test = s.test_split.string();
  jf::read(j, "root", root);
  jf::read(j, "train_split", train);
  jf::read(j, "test_split", test);
  s.root = root;
  s.train_split = train;
  s.test_split = test;
  std::string recipe = to_string(s.recipe);
  jf::read(j, "recipe", recipe);
  s.recipe = parse_recipe(recipe);
  jf::read(j, "target_size", s.target_size);
  jf::read(j, "seed", s.seed);
  if (j.contains("augment")) {
    jf::nested("augment", [&] {
      jf::read(j["augment"], "flip_prob", s.augment.flip_prob);
      jf::read(j["augment"], "max_shift", s.augment.max_shift);
    });
  }
  if (j.contains("synthetic") && !j["synthetic"].is_null()) {
    SyntheticSpec syn;
    jf::nested("synthetic", [&] {
      const auto& js = j["synthetic"];
      jf::read(js, "train_count", syn.train_count);
      jf::read(js, "test_count", syn.test_count);
      jf::read(js, "size", syn.size);
      jf::read(js, "seed", syn.seed);
    });
    s.synthetic = syn;
  }
  s.validate();
}

ImageTensor Dataset::raw(std::size_t i) const {
  if (i >= ids_.size()) throw ValidationError("dataset index out of range");
  if (!memory_.empty()) return memory_[i];
  return read_image(root_ / ids_[i]);
}

ImageTensor Dataset::preprocessed(std::size_t i, Rng* rng) const {
  return preprocess(recipe_, raw(i), rng, target_size_);
}

DatasetSplits ingest_dataset(const DatasetSpec& spec) {
  spec.validate();
  if (spec.synthetic) {
    const auto& syn = *spec.synthetic;
    std::vector<std::string> train_ids, test_ids;
    std::vector<ImageTensor> train_mem, test_mem;
    for (int i = 0; i < syn.train_count; ++i) {
      train_ids.push_back("synthetic/train/" + std::to_string(i));
      train_mem.push_back(synthetic_texture(syn.size, syn.seed, static_cast<std::uint64_t>(i)));
    }
    for (int i = 0; i < syn.test_count; ++i) {
      test_ids.push_back("synthetic/test/" + std::to_string(i));
      test_mem.push_back(
          synthetic_texture(syn.size, syn.seed, static_cast<std::uint64_t>(syn.train_count + i)));
    }
    return {DatasetBuilder::make(spec, std::move(train_ids), std::move(train_mem)),
            DatasetBuilder::make(spec, std::move(test_ids), std::move(test_mem))};
  }

  std::error_code ec;
  if (!std::filesystem::is_directory(spec.root, ec)) {
    throw IngestionError("dataset root '" + spec.root.string() + "' is not a readable directory");
  }
  std::vector<std::string> train, test;
  if (spec.train_split.empty() && spec.test_split.empty()) {
    train = scan_directory(spec.root);
    test = train;
  } else {
    if (!spec.train_split.empty()) train = read_split(spec.root, spec.train_split);
    if (!spec.test_split.empty()) test = read_split(spec.root, spec.test_split);
    std::vector<std::string> both;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(),
                          std::back_inserter(both));
    if (!both.empty()) {
      throw ValidationError("train and test splits overlap (" + std::to_string(both.size()) +
                            " shared, first '" + both.front() + "')");
    }
  }
  std::vector<std::string> all = train;
  all.insert(all.end(), test.begin(), test.end());
  check_files(spec.root, all);
  return {DatasetBuilder::make(spec, std::move(train)), DatasetBuilder::make(spec, std::move(test))};
}

ImageTensor preprocess_celeba(const ImageTensor& raw, Rng* rng, int target_size) {
  if (raw.height() < kCelebACrop || raw.width() < kCelebACrop) {
    throw PreprocessError("celeba recipe needs at least 160x160, got " +
                          std::to_string(raw.height()) + "x" + std::to_string(raw.width()));
  }
  const ImageTensor patch = square_crop(raw, kCelebACrop, rng);
  return normalize(resize(patch, target_size, target_size));
}

ImageTensor preprocess_streetview(const ImageTensor& raw, Rng* rng, int target_size) {
  const int h = raw.height(), w = raw.width();
  const int short_side = std::min(h, w);
  const auto scaled = [&](int side) {
    return std::max(target_size,
                    static_cast<int>(std::lround(static_cast<double>(side) * target_size / short_side)));
  };
  const ImageTensor resized = resize(raw, scaled(h), scaled(w));
  return normalize(square_crop(resized, target_size, rng));
}

ImageTensor preprocess_generic(const ImageTensor& raw, Rng* rng, int target_size) {
  return preprocess_streetview(raw, rng, target_size);
}

ImageTensor preprocess(Recipe recipe, const ImageTensor& raw, Rng* rng, int target_size) {
  if (raw.range() != RangeTag::kRaw || raw.channels() != 3) {
    throw PreprocessError("recipes expect raw RGB input");
  }
  switch (recipe) {
    case Recipe::kCelebA: return preprocess_celeba(raw, rng, target_size);
    case Recipe::kStreetView: return preprocess_streetview(raw, rng, target_size);
    case Recipe::kGeneric: return preprocess_generic(raw, rng, target_size);
  }
  throw PreprocessError("unknown recipe");
}

ImageTensor augment(const ImageTensor& img, const AugmentSpec& spec, Rng& rng) {
  std::bernoulli_distribution flip_draw(spec.flip_prob);
  const bool flip = flip_draw(rng);
  const int limit = std::min({spec.max_shift, img.height() - 1, img.width() - 1});
  int dy = 0, dx = 0;
  if (limit > 0) {
    std::uniform_int_distribution<int> shift(-limit, limit);
    dy = shift(rng);
    dx = shift(rng);
  }
  if (!flip && dy == 0 && dx == 0) return img;
  // Mirror without repeating the edge pixel.
  const auto reflect = [](int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  const int h = img.height(), w = img.width(), ch = img.channels();
  std::vector<Scalar> v(static_cast<std::size_t>(h) * w * ch);
  for (int y = 0; y < h; ++y) {
    const int sy = reflect(y - dy, h);
    for (int x = 0; x < w; ++x) {
      int sx = reflect(x - dx, w);
      if (flip) sx = w - 1 - sx;
      for (int c = 0; c < ch; ++c) v[(static_cast<std::size_t>(y) * w + x) * ch + c] = img.at(sy, sx, c);
    }
  }
  return ImageTensor(h, w, ch, img.range(), std::move(v));
}

ImageTensor synthetic_texture(int size, std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x7e47u};
  Rng rng(seq);
  std::uniform_real_distribution<Scalar> unit(0, 1);
  constexpr double kTau = 6.283185307179586;
  struct Wave {
    Scalar fy, fx, phase, amp;
  };
  std::array<Wave, 3> waves;
  for (auto& wv : waves) {
    const Scalar freq = 1 + 3 * unit(rng);
    const Scalar angle = kTau * unit(rng);
    wv = {freq * std::sin(angle), freq * std::cos(angle), kTau * unit(rng), 0.4 + 0.6 * unit(rng)};
  }
  std::array<std::array<Scalar, 3>, 2> palette;
  for (auto& col : palette)
    for (auto& c : col) c = 30 + 195 * unit(rng);
  const Scalar check = 2 + std::floor(4 * unit(rng));

  std::vector<Scalar> v(static_cast<std::size_t>(size) * size * 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Scalar u = static_cast<Scalar>(y) / size, s = static_cast<Scalar>(x) / size;
      Scalar t = 0, norm = 0;
      for (const auto& wv : waves) {
        t += wv.amp * std::sin(kTau * (wv.fy * u + wv.fx * s) + wv.phase);
        norm += wv.amp;
      }
      t = 0.5 + 0.5 * t / norm;
      const bool cell = (static_cast<int>(std::floor(u * check)) + static_cast<int>(std::floor(s * check))) % 2;
      const Scalar mix = std::clamp(0.8 * t + (cell ? 0.2 : 0.0), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const Scalar val = palette[0][c] * (1 - mix) + palette[1][c] * mix;
        v[(static_cast<std::size_t>(y) * size + x) * 3 + c] = std::round(std::clamp(val, 0.0, 255.0));
      }
    }
  }
  return ImageTensor(size, size, 3, RangeTag::kRaw, std::move(v));
}

ImageTensor CompletionBatch::gt_image(int n) const { return from_nchw(gt, n, RangeTag::kSigned); }

Mask CompletionBatch::mask_at(int n) const { return mask_from_nchw(mask, n); }

CompletionBatch assemble_batch(std::span<const ImageTensor> gt, std::span<const Mask> masks,
                               std::vector<std::string> ids) {
  if (gt.empty() || gt.size() != masks.size()) {
    throw ValidationError("assemble_batch: need one mask per image");
  }
  std::vector<ImageTensor> corrupted, input4;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    auto c = corrupt(gt[i], masks[i]);
    corrupted.push_back(std::move(c.corrupted));
    input4.push_back(std::move(c.input4));
  }
  CompletionBatch b;
  b.gt = to_nchw(gt);
  b.corrupted = to_nchw(corrupted);
  b.mask = masks_to_nchw(masks);
  b.input4 = to_nchw(input4);
  b.source_ids = std::move(ids);
  return b;
}

CompletionBatch make_batch(const Dataset& dataset, int batch_size, const MaskSpec& mask_spec,
                           Rng& rng) {
  if (batch_size < 1) throw ValidationError("make_batch: batch_size must be >= 1");
  if (dataset.empty()) throw ValidationError("make_batch: dataset is empty");
  mask_spec.validate(dataset.target_size(), dataset.target_size());
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::vector<ImageTensor> gt;
  std::vector<Mask> masks;
  std::vector<std::string> ids;
  for (int i = 0; i < batch_size; ++i) {
    const std::size_t idx = pick(rng);
    gt.push_back(sample_image(dataset, idx, true, rng));
    masks.push_back(sample_mask(mask_spec, gt.back().height(), gt.back().width(), rng));
    ids.push_back(dataset.id(idx));
  }
  return assemble_batch(gt, masks, std::move(ids));
}

BatchSampler::BatchSampler(const Dataset& dataset, SamplerOptions options)
    : dataset_(&dataset), options_(options) {
  if (options_.batch_size < 1) throw ConfigError("/batch_size: must be >= 1");
  if (dataset.empty()) throw ValidationError("BatchSampler: dataset is empty");
  options_.mask_spec.validate(dataset.target_size(), dataset.target_size());
}

std::size_t BatchSampler::item_at(std::int64_t position) const {
  const auto n = static_cast<std::int64_t>(dataset_->size());
  const std::int64_t epoch = position / n;
  if (epoch != cached_epoch_) {
    permutation_.resize(dataset_->size());
    std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
    Rng rng = sample_rng(options_.seed, epoch, -1);
    std::shuffle(permutation_.begin(), permutation_.end(), rng);
    cached_epoch_ = epoch;
  }
  return permutation_[static_cast<std::size_t>(position % n)];
}

CompletionBatch BatchSampler::batch_at(std::int64_t step) const {
  const std::int64_t b = options_.batch_size;
  const auto n = static_cast<std::int64_t>(dataset_->size());
  std::int64_t count = b;
  if (!options_.repeat) count = std::clamp<std::int64_t>(n - step * b, 0, b);
  if (count == 0) throw ValidationError("BatchSampler: step past the end of data");
  std::vector<ImageTensor> gt;
  std::vector<Mask> masks;
  std::vector<std::string> ids;
  for (int k = 0; k < count; ++k) {
    const std::size_t idx = item_at(step * b + k);
    Rng rng = sample_rng(options_.seed, step, k);
    gt.push_back(sample_image(*dataset_, idx, options_.augment, rng));
    masks.push_back(sample_mask(options_.mask_spec, gt.back().height(), gt.back().width(), rng));
    ids.push_back(dataset_->id(idx));
  }
  return assemble_batch(gt, masks, std::move(ids));
}

std::optional<CompletionBatch> BatchSampler::next() {
  const auto n = static_cast<std::int64_t>(dataset_->size());
  if (!options_.repeat && cursor_ * options_.batch_size >= n) return std::nullopt;
  return batch_at(cursor_++);
}

Prefetcher::Prefetcher(const BatchSampler& sampler, std::int64_t first_step, int depth)
    : sampler_(sampler), next_step_(first_step), depth_(static_cast<std::size_t>(std::max(1, depth))) {
  worker_ = std::thread([this] { run(); });
}

Prefetcher::~Prefetcher() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

void Prefetcher::run() {
  // The sampler's permutation cache is not shared: the worker uses its own
  // copy of the sampler.
  BatchSampler local = sampler_;
  while (true) {
    std::int64_t step;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stop_ || queue_.size() < depth_; });
      if (stop_) return;
      step = next_step_++;
    }
    try {
      CompletionBatch b = local.batch_at(step);
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(b));
    } catch (...) {
      std::lock_guard lock(mu_);
      error_ = std::current_exception();
      stop_ = true;
    }
    cv_.notify_all();
  }
}

CompletionBatch Prefetcher::pop() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !queue_.empty() || error_; });
  if (queue_.empty()) std::rethrow_exception(error_);
  CompletionBatch b = std::move(queue_.front());
  queue_.pop_front();
  lock.unlock();
  cv_.notify_all();
  return b;
}

}  // namespace inpaint
