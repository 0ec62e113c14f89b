#include "dsnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <vector>

namespace dsnet {

namespace {
constexpr char kMagic[4] = {'D', 'S', 'N', 'C'};
constexpr uint32_t kVersion = 1;

using json = nlohmann::json;
}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& file,
                     const std::string& meta_json) {
  json manifest;
  manifest["meta"] = meta_json.empty() ? json::object() : json::parse(meta_json);
  manifest["tensors"] = json::array();

  int64_t offset = 0;
  const auto params = net.params();
  for (const Param* p : params) {
    json t;
    t["name"] = p->name;
    t["shape"] = p->value.dims();
    t["offset"] = offset;
    t["trainable"] = p->trainable;
    manifest["tensors"].push_back(std::move(t));
    offset += p->value.numel() * static_cast<int64_t>(sizeof(float));
  }

  const std::string mstr = manifest.dump();
  std::ofstream os(file, std::ios::binary);
  if (!os) throw CheckpointError("cannot open checkpoint for writing: " + file.string());
  os.write(kMagic, 4);
  const uint32_t ver = kVersion;
  os.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  const uint64_t mlen = mstr.size();
  os.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  os.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  for (const Param* p : params) {
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  }
  if (!os) throw CheckpointError("short write while saving checkpoint: " + file.string());
}

std::string load_checkpoint(Network& net, const std::filesystem::path& file,
                            bool allow_subset) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + file.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint archive: " + file.string());
  }
  uint32_t ver = 0;
  is.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (!is || ver != kVersion) {
    throw CheckpointError("unsupported checkpoint version in " + file.string());
  }
  uint64_t mlen = 0;
  is.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  std::string mstr(mlen, '\0');
  is.read(mstr.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw CheckpointError("truncated checkpoint manifest: " + file.string());
  const std::streampos blob_start = is.tellg();

  json manifest = json::parse(mstr, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("tensors")) {
    throw CheckpointError("malformed checkpoint manifest: " + file.string());
  }

  // Validate every entry against the model before touching any weights.
  struct Pending {
    Param* param;
    int64_t offset;
  };
  std::vector<Pending> pending;
  std::set<std::string> seen;
  for (const auto& t : manifest["tensors"]) {
    const std::string name = t.at("name").get<std::string>();
    const std::vector<int> shape = t.at("shape").get<std::vector<int>>();
    Param* p = net.find_param(name);
    if (!p) {
      throw CheckpointError("checkpoint tensor '" + name + "' has no matching layer");
    }
    if (p->value.dims() != shape) {
      throw CheckpointError("shape mismatch for layer '" + name + "': model " +
                            p->value.shape_str() + " vs file " +
                            Tensor::zeros(shape).shape_str());
    }
    pending.push_back({p, t.at("offset").get<int64_t>()});
    seen.insert(name);
  }
  if (!allow_subset) {
    for (const Param* p : net.params()) {
      if (!seen.count(p->name)) {
        throw CheckpointError("checkpoint is missing tensor '" + p->name + "'");
      }
    }
  }

  for (const auto& [p, offset] : pending) {
    is.seekg(blob_start + static_cast<std::streamoff>(offset));
    is.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
    if (!is) {
      throw CheckpointError("truncated data for tensor '" + p->name + "' in " +
                            file.string());
    }
  }

  return manifest.contains("meta") ? manifest["meta"].dump() : std::string("{}");
}

}  // namespace dsnet
