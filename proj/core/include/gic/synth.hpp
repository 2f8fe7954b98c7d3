#pragma once

#include <cstdint>
#include <vector>

#include "gic/data.hpp"

namespace gic {

// Procedural image corpus. Every (task, class) pair owns a texture family
// whose class signal survives the augmentation pipeline: a brightness ramp,
// class-indexed stripe frequency and class-indexed blob count, on a
// task-indexed base hue. Images are deterministic per
// (seed, dataset, split, class, index) and independent of generation order.
TensorF synth_image(int image_size, int task_index, int class_index, int num_classes, std::uint64_t sample_seed);

std::vector<Sample> synth_generate(const Registry& registry, const DatasetSpec& dataset, Split split,
                                   std::uint64_t seed);

// All declared splits of every dataset, keyed by (dataset id, split).
struct SynthCorpus {
  std::vector<Sample> train; // union over datasets, in registry order
  std::map<int, std::vector<Sample>> val;
  std::map<int, std::vector<Sample>> test;
};

SynthCorpus synth_corpus(const Registry& registry, std::uint64_t seed);

} // namespace gic
