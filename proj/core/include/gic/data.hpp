#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gic/tensor.hpp"

namespace gic {

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& name); // throws ConfigError

struct TaskSpec {
  int id = -1;
  std::string name;
  std::vector<std::string> labels; // canonical, index = class id
  bool grading = false;
  int benign_class = -1; // grading tasks name their benign class

  int num_classes() const { return static_cast<int>(labels.size()); }
  int class_of(const std::string& canonical_label) const; // -1 when absent
};

enum class DatasetRole { kTrainValTest, kExternalTest };

struct DatasetSpec {
  int id = -1;
  std::string name;
  int task_id = -1;
  DatasetRole role = DatasetRole::kTrainValTest;
  int train_per_class = 0; // 0 for external-test datasets
  int val_per_class = 0;
  int test_per_class = 0;
  int image_size = 64;
  std::string magnification; // metadata only
  int source_patch_px = 0;   // native patch size of the real dataset, metadata only

  bool has_split(Split s) const {
    if (role == DatasetRole::kExternalTest) return s == Split::kTest;
    return true;
  }
  int per_class(Split s) const {
    switch (s) {
      case Split::kTrain: return train_per_class;
      case Split::kVal: return val_per_class;
      default: return test_per_class;
    }
  }
};

struct Sample {
  TensorF image; // [3,H,W], values in [0,1]
  int class_id = -1;
  std::string label; // canonical text label
  int dataset_id = -1;
  int task_id = -1;
  Split split = Split::kTrain;
  int index = -1; // position within (dataset, split)
};

// The multi-task layout: four tasks over six datasets. Two grading datasets
// (Colon-2, Prostate-2) exist only as independent external test sets.
struct Registry {
  std::vector<TaskSpec> tasks;
  std::vector<DatasetSpec> datasets;

  const TaskSpec& task(int id) const;
  const DatasetSpec& dataset(int id) const;
  const DatasetSpec* dataset_by_name(const std::string& name) const;
  std::vector<std::string> all_labels() const; // task order, label order within task
};

Registry default_registry(int train_per_class = 200, int val_per_class = 50, int test_per_class = 50,
                          int image_size = 64);

// Epoch batching: shuffles sample indices with a per-(seed,epoch) stream and
// chunks them. The final partial batch is kept, so every sample appears
// exactly once per epoch.
std::vector<std::vector<std::size_t>> make_epoch_batches(std::size_t corpus_size, std::size_t batch_size,
                                                         std::uint64_t seed, std::uint64_t epoch);

// Image-folder layout: root/<dataset>/<split>/<label with underscores>/NNNNNN.png
std::string label_to_dirname(const std::string& canonical_label);
std::string dirname_to_label(const std::string& dirname);

void export_image_folder(const std::filesystem::path& root, const Registry& registry,
                         const std::vector<Sample>& samples);
std::vector<Sample> load_image_folder(const std::filesystem::path& root, const Registry& registry,
                                      const std::string& dataset_name, Split split);

} // namespace gic
