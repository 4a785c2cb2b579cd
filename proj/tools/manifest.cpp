#include "manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <sstream>

#include "dgseq/errors.hpp"

namespace dgseq::cli {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

RunManifest::RunManifest(std::string command, const nlohmann::json& config, std::uint64_t seed)
    : command_(std::move(command)), config_hash_(sha256_hex(config.dump())), seed_(seed) {}

void RunManifest::input(const std::filesystem::path& path) { inputs_.emplace_back(path.string(), file_sha256(path)); }

void RunManifest::output(const std::filesystem::path& path) {
  outputs_.emplace_back(path.string(), file_sha256(path));
}

void RunManifest::write(const std::filesystem::path& path) const {
  auto list = [](const auto& files) {
    auto arr = nlohmann::json::array();
    for (const auto& [p, sum] : files) arr.push_back({{"path", p}, {"sha256", sum}});
    return arr;
  };
  nlohmann::json j{{"command", command_}, {"config_hash", config_hash_}, {"seed", seed_},
                   {"inputs", list(inputs_)}, {"outputs", list(outputs_)}};
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace dgseq::cli
