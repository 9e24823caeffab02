#pragma once

#include <filesystem>

#include "adafsnet/model.hpp"

namespace adafsnet {

// Self-describing flat file: magic + version, a JSON header carrying the
// kernel plan, model config, input dimension and the array manifest, then the
// named arrays in declaration order as little-endian 64-bit floats.
void save_checkpoint(AdaFSNet& model, const std::filesystem::path& path);

AdaFSNet load_checkpoint(const std::filesystem::path& path);

}  // namespace adafsnet
