#include "rolab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolab/errors.hpp"

namespace rolab {

namespace {

void put_le64(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
}

double get_le64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void save_net(const MlpNet& net, const std::filesystem::path& stem,
              const std::string& role) {
  std::vector<unsigned char> bytes;
  std::size_t count = 0;
  for (const Tensor* t : net.params()) {
    for (double v : t->raw()) put_le64(bytes, v);
    count += t->numel();
  }

  std::filesystem::create_directories(stem.parent_path());
  {
    std::ofstream bin(stem.string() + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("save_net: cannot open " + stem.string() + ".bin");
    bin.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }

  nlohmann::json manifest;
  manifest["layer_dims"] = net.layer_dims;
  std::vector<std::string> acts;
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    const bool last = l + 2 == net.layer_dims.size();
    acts.push_back(last ? to_string(net.out_act) : "relu");
  }
  manifest["activations"] = acts;
  manifest["float_count"] = count;
  manifest["role"] = role;
  std::ofstream js(stem.string() + ".json", std::ios::trunc);
  if (!js) throw std::runtime_error("save_net: cannot open " + stem.string() + ".json");
  js << manifest.dump(2) << "\n";
}

MlpNet load_net(const std::filesystem::path& stem, std::string* role_out) {
  const std::string json_path = stem.string() + ".json";
  const std::string bin_path = stem.string() + ".bin";
  std::ifstream js(json_path);
  if (!js) throw MissingArtifactError("checkpoint manifest not found: " + json_path);
  nlohmann::json manifest = nlohmann::json::parse(js);

  MlpNet net;
  net.layer_dims = manifest.at("layer_dims").get<std::vector<int>>();
  const auto acts = manifest.at("activations").get<std::vector<std::string>>();
  if (acts.size() + 1 != net.layer_dims.size())
    throw std::runtime_error("load_net: activation list does not match layer_dims");
  for (std::size_t i = 0; i + 1 < acts.size(); ++i)
    if (acts[i] != "relu")
      throw std::runtime_error("load_net: unsupported hidden activation " + acts[i]);
  net.out_act = output_activation_from_string(acts.back());
  if (role_out) *role_out = manifest.at("role").get<std::string>();

  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    net.weights.emplace_back(net.layer_dims[l + 1], net.layer_dims[l]);
    net.biases.emplace_back(1, net.layer_dims[l + 1]);
    expected += net.weights.back().numel() + net.biases.back().numel();
  }
  if (manifest.at("float_count").get<std::size_t>() != expected)
    throw std::runtime_error("load_net: float_count does not match layer_dims");

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw MissingArtifactError("checkpoint payload not found: " + bin_path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() != expected * 8)
    throw std::runtime_error("load_net: payload size mismatch in " + bin_path);

  std::size_t off = 0;
  for (Tensor* t : net.params()) {
    for (auto& v : t->raw()) {
      v = get_le64(bytes.data() + off);
      off += 8;
    }
  }
  return net;
}

std::string file_hash_hex(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingArtifactError("file_hash_hex: cannot open " + file.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (in.eof()) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string(out);
}

}  // namespace rolab
