#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "dsnet/graph.hpp"

namespace dsnet {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Single-archive checkpoint: a JSON manifest mapping tensor names to shapes
// and offsets, followed by raw little-endian float32 data. `meta_json` is an
// arbitrary JSON object string stored alongside the manifest.
void save_checkpoint(const Network& net, const std::filesystem::path& file,
                     const std::string& meta_json = "{}");

// Loads tensors into matching parameters. Every shape is validated against
// the manifest before any data is copied; the first mismatch is reported by
// name. With allow_subset the archive may cover only part of the network
// (e.g. encoder-only weights); otherwise it must cover every parameter.
// Returns the stored meta JSON string.
std::string load_checkpoint(Network& net, const std::filesystem::path& file,
                            bool allow_subset = false);

}  // namespace dsnet
