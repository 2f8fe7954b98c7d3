#include "gic/synth.hpp"

#include <cmath>

#include "gic/error.hpp"
#include "gic/rng.hpp"

namespace gic {

namespace {

// Well separated base hues; one per task.
constexpr float kHues[][3] = {
    {0.85f, 0.35f, 0.30f},
    {0.30f, 0.75f, 0.35f},
    {0.30f, 0.45f, 0.85f},
    {0.80f, 0.75f, 0.25f},
    {0.70f, 0.30f, 0.75f},
    {0.25f, 0.75f, 0.75f},
};
constexpr int kNumHues = 6;

constexpr double kStripeAmp = 0.12;
constexpr double kBlobAmp = 0.35;
constexpr double kNoiseSigma = 0.02;

} // namespace

TensorF synth_image(int image_size, int task_index, int class_index, int num_classes, std::uint64_t sample_seed) {
  if (image_size < 16) throw DataError("synth_image: image_size must be >= 16");
  Rng rng(sample_seed);
  std::size_t sz = static_cast<std::size_t>(image_size);
  const float* hue = kHues[task_index % kNumHues];

  // Class signals: brightness level ramp, stripe frequency, blob count.
  double level = 0.35 + 0.5 * (class_index + 0.5) / num_classes;
  double freq = 2.0 + 1.5 * class_index;
  double theta = rng.uniform(0.0, 3.141592653589793);
  double phase = rng.uniform(0.0, 6.283185307179586);
  double ct = std::cos(theta), st = std::sin(theta);

  int blob_count = class_index + 1;
  double blob_sigma = 0.055 * image_size;
  std::vector<std::pair<double, double>> blobs;
  blobs.reserve(static_cast<std::size_t>(blob_count));
  for (int i = 0; i < blob_count; ++i) {
    double cx = rng.uniform(0.15, 0.85) * image_size;
    double cy = rng.uniform(0.15, 0.85) * image_size;
    blobs.emplace_back(cx, cy);
  }

  // Shared (colorless) structure field: stripes plus blob bumps.
  std::vector<double> field(sz * sz, 0.0);
  for (std::size_t y = 0; y < sz; ++y) {
    double v = (static_cast<double>(y) + 0.5) / image_size;
    for (std::size_t x = 0; x < sz; ++x) {
      double u = (static_cast<double>(x) + 0.5) / image_size;
      field[y * sz + x] = kStripeAmp * std::sin(6.283185307179586 * freq * (u * ct + v * st) + phase);
    }
  }
  int radius = static_cast<int>(std::ceil(3.0 * blob_sigma));
  for (const auto& [cx, cy] : blobs) {
    int x0 = std::max(0, static_cast<int>(cx) - radius);
    int x1 = std::min(image_size - 1, static_cast<int>(cx) + radius);
    int y0 = std::max(0, static_cast<int>(cy) - radius);
    int y1 = std::min(image_size - 1, static_cast<int>(cy) + radius);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        field[static_cast<std::size_t>(y) * sz + x] +=
            kBlobAmp * std::exp(-(dx * dx + dy * dy) / (2.0 * blob_sigma * blob_sigma));
      }
    }
  }

  TensorF img = TensorF::zeros({3, sz, sz});
  std::size_t hw = sz * sz;
  // Noise draws run channel-major so the stream layout is documented.
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < hw; ++i) {
      double val = hue[c] * level + field[i] + rng.normal(0.0, kNoiseSigma);
      img[c * hw + i] = static_cast<float>(std::clamp(val, 0.0, 1.0));
    }
  }
  return img;
}

std::vector<Sample> synth_generate(const Registry& registry, const DatasetSpec& dataset, Split split,
                                   std::uint64_t seed) {
  if (!dataset.has_split(split)) {
    throw DataError("dataset " + dataset.name + " has no " + split_name(split) + " split");
  }
  const TaskSpec& task = registry.task(dataset.task_id);
  int per_class = dataset.per_class(split);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(per_class) * task.labels.size());
  for (int cls = 0; cls < task.num_classes(); ++cls) {
    for (int i = 0; i < per_class; ++i) {
      std::uint64_t sample_seed =
          Rng::fold_all(seed, {static_cast<std::uint64_t>(dataset.id), static_cast<std::uint64_t>(split),
                               static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(i)});
      Sample s;
      s.image = synth_image(dataset.image_size, task.id, cls, task.num_classes(), sample_seed);
      s.class_id = cls;
      s.label = task.labels[static_cast<std::size_t>(cls)];
      s.dataset_id = dataset.id;
      s.task_id = task.id;
      s.split = split;
      s.index = cls * per_class + i;
      out.push_back(std::move(s));
    }
  }
  return out;
}

SynthCorpus synth_corpus(const Registry& registry, std::uint64_t seed) {
  SynthCorpus corpus;
  for (const auto& d : registry.datasets) {
    if (d.has_split(Split::kTrain)) {
      auto tr = synth_generate(registry, d, Split::kTrain, seed);
      corpus.train.insert(corpus.train.end(), std::make_move_iterator(tr.begin()), std::make_move_iterator(tr.end()));
    }
    if (d.has_split(Split::kVal)) corpus.val[d.id] = synth_generate(registry, d, Split::kVal, seed);
    if (d.has_split(Split::kTest)) corpus.test[d.id] = synth_generate(registry, d, Split::kTest, seed);
  }
  return corpus;
}

} // namespace gic
