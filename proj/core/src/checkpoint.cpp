#include "gic/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gic/hash.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

namespace gic {

namespace {

constexpr char kMagic[9] = "GICKPT01";
constexpr int kFormatVersion = 1;

using json = nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json task_to_json(const TaskSpec& t) {
  return json{{"id", t.id},
              {"name", t.name},
              {"labels", t.labels},
              {"grading", t.grading},
              {"benign_class", t.benign_class}};
}

TaskSpec task_from_json(const json& j) {
  TaskSpec t;
  t.id = j.at("id").get<int>();
  t.name = j.at("name").get<std::string>();
  t.labels = j.at("labels").get<std::vector<std::string>>();
  t.grading = j.at("grading").get<bool>();
  t.benign_class = j.at("benign_class").get<int>();
  return t;
}

} // namespace

void checkpoint_save(const ModelBundleF& bundle, const std::filesystem::path& path) {
  std::vector<char> payload;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : bundle.params) {
    std::size_t bytes = t.size() * sizeof(float);
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    entry["bytes"] = bytes;
    tensors.push_back(entry);
    payload.resize(offset + bytes);
    std::memcpy(payload.data() + offset, t.data(), bytes);
    offset += bytes;
  }

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["setting"] = setting_name(bundle.setting);
  manifest["n_prefix"] = bundle.n_prefix;
  manifest["seq_len"] = bundle.seq_len;
  manifest["extractor"] = {{"depths", bundle.extractor_cfg.depths},
                           {"widths", bundle.extractor_cfg.widths},
                           {"kernel_size", bundle.extractor_cfg.kernel_size},
                           {"stem_stride", bundle.extractor_cfg.stem_stride},
                           {"in_channels", bundle.extractor_cfg.in_channels}};
  manifest["decoder"] = {{"layers", bundle.decoder_cfg.layers},
                         {"heads", bundle.decoder_cfg.heads},
                         {"d_model", bundle.decoder_cfg.d_model}};
  json tasks = json::array();
  for (const auto& t : bundle.tasks) tasks.push_back(task_to_json(t));
  manifest["tasks"] = tasks;
  manifest["vocabulary"] = bundle.vocab.tokens();
  manifest["tensors"] = tensors;
  manifest["payload_bytes"] = payload.size();
  manifest["payload_fnv1a64"] = hex64(fnv1a64(payload.data(), payload.size()));

  std::string manifest_text = manifest.dump(2);
  std::uint64_t manifest_len = manifest_text.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint_save: cannot open " + path.string());
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&manifest_len), sizeof(manifest_len));
  out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("checkpoint_save: write failed for " + path.string());
}

ModelBundleF checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint_load: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointError("checkpoint_load: bad magic in " + path.string());
  }
  std::uint64_t manifest_len = 0;
  in.read(reinterpret_cast<char*>(&manifest_len), sizeof(manifest_len));
  if (!in) throw CheckpointError("checkpoint_load: truncated header in " + path.string());
  std::string manifest_text(manifest_len, '\0');
  in.read(manifest_text.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) throw CheckpointError("checkpoint_load: truncated manifest in " + path.string());

  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint_load: manifest parse error: " + std::string(e.what()));
  }
  if (manifest.at("format_version").get<int>() != kFormatVersion) {
    throw CheckpointError("checkpoint_load: unsupported format version " +
                          manifest.at("format_version").dump());
  }

  std::size_t payload_bytes = manifest.at("payload_bytes").get<std::size_t>();
  std::vector<char> payload(payload_bytes);
  in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::size_t>(in.gcount()) != payload_bytes) {
    throw CheckpointError("checkpoint_load: truncated payload in " + path.string());
  }
  std::string checksum = hex64(fnv1a64(payload.data(), payload.size()));
  if (checksum != manifest.at("payload_fnv1a64").get<std::string>()) {
    throw CheckpointError("checkpoint_load: payload checksum mismatch in " + path.string());
  }

  ExtractorConfig ec;
  const json& je = manifest.at("extractor");
  ec.depths = je.at("depths").get<std::vector<int>>();
  ec.widths = je.at("widths").get<std::vector<int>>();
  ec.kernel_size = je.at("kernel_size").get<int>();
  ec.stem_stride = je.at("stem_stride").get<int>();
  ec.in_channels = je.at("in_channels").get<int>();
  DecoderConfig dc;
  const json& jd = manifest.at("decoder");
  dc.layers = jd.at("layers").get<int>();
  dc.heads = jd.at("heads").get<int>();
  dc.d_model = jd.at("d_model").get<int>();
  std::vector<TaskSpec> tasks;
  for (const auto& jt : manifest.at("tasks")) tasks.push_back(task_from_json(jt));
  Setting setting = parse_setting(manifest.at("setting").get<std::string>());
  int n_prefix = manifest.at("n_prefix").get<int>();

  ModelBundleF bundle = init_weights<float>(ec, dc, tasks, setting, n_prefix, 0);
  if (bundle.seq_len != manifest.at("seq_len").get<int>()) {
    throw CheckpointError("checkpoint_load: seq_len mismatch between manifest and rebuilt vocabulary");
  }
  if (bundle.vocab.tokens() != manifest.at("vocabulary").get<std::vector<std::string>>()) {
    throw CheckpointError("checkpoint_load: vocabulary mismatch between manifest and task labels");
  }

  const json& tensors = manifest.at("tensors");
  if (tensors.size() != bundle.params.size()) {
    throw CheckpointError("checkpoint_load: manifest lists " + std::to_string(tensors.size()) + " tensors, bundle has " +
                          std::to_string(bundle.params.size()));
  }
  for (const auto& entry : tensors) {
    std::string name = entry.at("name").get<std::string>();
    Tensor<float>* t = bundle.find_param(name);
    if (!t) throw CheckpointError("checkpoint_load: unknown tensor \"" + name + "\"");
    Shape shape = entry.at("shape").get<Shape>();
    if (shape != t->shape()) {
      throw CheckpointError("checkpoint_load: tensor \"" + name + "\" shape " + shape_str(shape) +
                            " != expected " + shape_str(t->shape()));
    }
    std::size_t offset = entry.at("offset").get<std::size_t>();
    std::size_t bytes = entry.at("bytes").get<std::size_t>();
    if (bytes != t->size() * sizeof(float)) {
      throw CheckpointError("checkpoint_load: tensor \"" + name + "\" byte length " + std::to_string(bytes) +
                            " != 4 * " + std::to_string(t->size()));
    }
    if (offset + bytes > payload.size()) {
      throw CheckpointError("checkpoint_load: tensor \"" + name + "\" overruns payload");
    }
    std::memcpy(t->data(), payload.data() + offset, bytes);
  }
  return bundle;
}

} // namespace gic
