#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <openssl/evp.h>
#include <nlohmann/json.hpp>

#include "ecocontrib/types.hpp"

namespace ecocontrib {

namespace fs = std::filesystem;

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

inline std::string config_digest(const nlohmann::json& config) {
  return sha256_hex(config.dump());
}

/// Exclusive lock on a workspace, held for the lifetime of the object.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const fs::path& root) : path_(root / ".lock") {
    fs::create_directories(root);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw DataError("workspace is locked by another command (remove " + path_.string() +
                      " if no command is running)");
    const auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~WorkspaceLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

/// Digests a stage was last run with. A stage is up to date when its input
/// and config digests match and every recorded output is unchanged on disk.
struct StageManifest {
  std::string config_digest;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;

  static fs::path path_for(const fs::path& root, const std::string& stage) {
    return root / "stages" / (stage + ".json");
  }

  bool up_to_date(const StageManifest& current) const {
    if (config_digest != current.config_digest || inputs != current.inputs) return false;
    for (const auto& [path, digest] : outputs) {
      std::error_code ec;
      if (!fs::exists(path, ec) || file_digest(path) != digest) return false;
    }
    return !outputs.empty();
  }

  static std::optional<StageManifest> load(const fs::path& root, const std::string& stage) {
    std::ifstream in(path_for(root, stage));
    if (!in) return std::nullopt;
    try {
      const auto j = nlohmann::json::parse(in);
      StageManifest m;
      m.config_digest = j.at("config_digest").get<std::string>();
      m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
      m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
      return m;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
  }

  void save(const fs::path& root, const std::string& stage) const {
    fs::create_directories(root / "stages");
    std::ofstream out(path_for(root, stage));
    out << nlohmann::json{{"stage", stage},
                          {"config_digest", config_digest},
                          {"inputs", inputs},
                          {"outputs", outputs}}
               .dump(2)
        << '\n';
  }
};

}  // namespace ecocontrib
