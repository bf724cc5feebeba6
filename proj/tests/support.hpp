#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include <json.hpp>

#include "parg/common.hpp"
#include "parg/corpus.hpp"

#ifndef PARG_TEST_DATA
#error "PARG_TEST_DATA must point at tests/data"
#endif

namespace parg::test {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(PARG_TEST_DATA) / name; }

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("parg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random token sequence over a small alphabet so n-grams collide often.
inline Tokens random_tokens(Rng& rng, std::size_t min_len, std::size_t max_len, int alphabet = 8) {
  const std::size_t n = min_len + static_cast<std::size_t>(rng.below(max_len - min_len + 1));
  Tokens out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(rng.below(static_cast<std::uint64_t>(alphabet))));
  return out;
}

inline const Corpus& mini_camrest() {
  static const Corpus c = load_canonical(data("mini_camrest.json"));
  return c;
}

inline const Corpus& mini_multidomain() {
  static const Corpus c = load_canonical(data("mini_multidomain.json"));
  return c;
}

}  // namespace parg::test
