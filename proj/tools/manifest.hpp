#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace dgseq::cli {

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Record of one command invocation: what was read, what was written, and
/// enough to rerun it. The manifest file itself is not listed.
class RunManifest {
 public:
  RunManifest(std::string command, const nlohmann::json& config, std::uint64_t seed);

  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::string config_hash_;
  std::uint64_t seed_;
  nlohmann::json extra_ = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

}  // namespace dgseq::cli
