#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "commshift/corpus.hpp"

namespace testutil {

// self-deleting unique directory under the system temp root
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::string tmpl = (base / "commshift-test-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::vector<commshift::corpus::Community> two_members_plus_global() {
  using commshift::corpus::Community;
  using commshift::corpus::CommunityKind;
  return {{"alpha", CommunityKind::member},
          {"beta", CommunityKind::member},
          {"global", CommunityKind::global}};
}

// tokenized sentence helper
inline std::vector<std::string> words(std::initializer_list<const char*> ws) {
  return std::vector<std::string>(ws.begin(), ws.end());
}

}  // namespace testutil
