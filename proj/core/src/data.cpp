#include "gic/data.hpp"

#include <algorithm>

#include "gic/error.hpp"
#include "gic/png_io.hpp"
#include "gic/rng.hpp"
#include "gic/tokenizer.hpp"

namespace gic {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    default: return "test";
  }
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split \"" + name + "\"");
}

int TaskSpec::class_of(const std::string& canonical_label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == canonical_label) return static_cast<int>(i);
  }
  return -1;
}

const TaskSpec& Registry::task(int id) const {
  for (const auto& t : tasks)
    if (t.id == id) return t;
  throw DataError("unknown task id " + std::to_string(id));
}

const DatasetSpec& Registry::dataset(int id) const {
  for (const auto& d : datasets)
    if (d.id == id) return d;
  throw DataError("unknown dataset id " + std::to_string(id));
}

const DatasetSpec* Registry::dataset_by_name(const std::string& name) const {
  for (const auto& d : datasets)
    if (d.name == name) return &d;
  return nullptr;
}

std::vector<std::string> Registry::all_labels() const {
  std::vector<std::string> out;
  for (const auto& t : tasks)
    for (const auto& l : t.labels) out.push_back(l);
  return out;
}

Registry default_registry(int train_per_class, int val_per_class, int test_per_class, int image_size) {
  if (train_per_class < 1 || val_per_class < 1 || test_per_class < 1) {
    throw ConfigError("default_registry: per-class split sizes must be positive");
  }
  if (image_size < 16) throw ConfigError("default_registry: image_size must be >= 16");

  Registry r;
  TaskSpec colon{0,
                 "colorectal_grading",
                 {"benign", "well differentiated cancer", "moderately differentiated cancer",
                  "poorly differentiated cancer"},
                 true,
                 0};
  TaskSpec prostate{1, "prostate_grading", {"benign", "grade 3 cancer", "grade 4 cancer", "grade 5 cancer"}, true, 0};
  TaskSpec gastric{2,
                   "gastric_grading",
                   {"benign", "tubular well differentiated cancer", "tubular moderately differentiated cancer",
                    "tubular poorly differentiated cancer"},
                   true,
                   0};
  TaskSpec typing{3,
                  "colorectal_tissue_typing",
                  {"adipose", "background", "debris", "lymphocyte", "normal", "stroma", "epithelium", "muscle",
                   "mucus"},
                  false,
                  -1};
  r.tasks = {colon, prostate, gastric, typing};

  auto ds = [&](int id, std::string name, int task, DatasetRole role, std::string mag, int src_px) {
    DatasetSpec d;
    d.id = id;
    d.name = std::move(name);
    d.task_id = task;
    d.role = role;
    d.train_per_class = role == DatasetRole::kExternalTest ? 0 : train_per_class;
    d.val_per_class = role == DatasetRole::kExternalTest ? 0 : val_per_class;
    d.test_per_class = test_per_class;
    d.image_size = image_size;
    d.magnification = std::move(mag);
    d.source_patch_px = src_px;
    return d;
  };
  r.datasets = {
      ds(0, "Colon-1", 0, DatasetRole::kTrainValTest, "20x", 512),
      ds(1, "Colon-2", 0, DatasetRole::kExternalTest, "20x", 512),
      ds(2, "Prostate-1", 1, DatasetRole::kTrainValTest, "40x", 750),
      ds(3, "Prostate-2", 1, DatasetRole::kExternalTest, "40x", 690),
      ds(4, "Gastric", 2, DatasetRole::kTrainValTest, "40x", 512),
      ds(5, "K19", 3, DatasetRole::kTrainValTest, "20x", 224),
  };
  return r;
}

std::vector<std::vector<std::size_t>> make_epoch_batches(std::size_t corpus_size, std::size_t batch_size,
                                                         std::uint64_t seed, std::uint64_t epoch) {
  if (corpus_size == 0) throw DataError("make_epoch_batches: empty corpus");
  if (batch_size == 0) throw ConfigError("make_epoch_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(corpus_size);
  for (std::size_t i = 0; i < corpus_size; ++i) order[i] = i;
  Rng rng(Rng::fold_all(seed, {0x62617463ULL /*"batc"*/, epoch}));
  for (std::size_t i = corpus_size; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < corpus_size; at += batch_size) {
    std::size_t end = std::min(corpus_size, at + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::string label_to_dirname(const std::string& canonical_label) {
  std::string out = canonical_label;
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

std::string dirname_to_label(const std::string& dirname) {
  std::string out = dirname;
  std::replace(out.begin(), out.end(), '_', ' ');
  return canonicalize_label(out);
}

void export_image_folder(const std::filesystem::path& root, const Registry& registry,
                         const std::vector<Sample>& samples) {
  for (const auto& s : samples) {
    const auto& dataset = registry.dataset(s.dataset_id);
    std::filesystem::path dir = root / dataset.name / split_name(s.split) / label_to_dirname(s.label);
    std::filesystem::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", s.index);
    write_png_rgb8(dir / name, tensor_to_rgb8(s.image));
  }
}

std::vector<Sample> load_image_folder(const std::filesystem::path& root, const Registry& registry,
                                      const std::string& dataset_name, Split split) {
  const DatasetSpec* dataset = registry.dataset_by_name(dataset_name);
  if (!dataset) throw DataError("unknown dataset \"" + dataset_name + "\"");
  const TaskSpec& task = registry.task(dataset->task_id);
  std::filesystem::path dir = root / dataset_name / split_name(split);
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("missing split directory " + dir.string());
  }
  std::vector<std::filesystem::path> class_dirs;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<Sample> samples;
  for (const auto& cdir : class_dirs) {
    std::string label = dirname_to_label(cdir.filename().string());
    int cls = task.class_of(label);
    if (cls < 0) {
      throw DataError("class directory \"" + cdir.filename().string() + "\" is not a label of task " + task.name);
    }
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(cdir)) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Sample s;
      s.image = rgb8_to_tensor(read_png_rgb8(f));
      s.class_id = cls;
      s.label = label;
      s.dataset_id = dataset->id;
      s.task_id = task.id;
      s.split = split;
      s.index = static_cast<int>(samples.size());
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty()) throw DataError("no PNG samples under " + dir.string());
  return samples;
}

} // namespace gic
