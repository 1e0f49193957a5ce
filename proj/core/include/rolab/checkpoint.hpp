#pragma once

#include <filesystem>
#include <string>

#include "rolab/net.hpp"

namespace rolab {

// Network checkpoint layout: <stem>.bin holds every parameter as
// little-endian 64-bit floats in layer order W1,b1,W2,b2,... (row-major
// within a tensor); <stem>.json is the manifest
//   {layer_dims, activations, float_count, role}.
// Round trips are bit-exact.
void save_net(const MlpNet& net, const std::filesystem::path& stem,
              const std::string& role);

MlpNet load_net(const std::filesystem::path& stem,
                std::string* role_out = nullptr);

// FNV-1a 64 over a file's raw bytes, as a 16-char lowercase hex string.
std::string file_hash_hex(const std::filesystem::path& file);

}  // namespace rolab
