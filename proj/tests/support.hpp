#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include "forge/errors.hpp"
#include "forge/judge.hpp"

namespace forge::test {

// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    auto base = std::filesystem::temp_directory_path() / "forge-tests";
    path = base / ("t" + std::to_string(::getpid()) + "-" +
                   std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Deterministic reward oracle: harmful iff the response contains the trigger
// substring. Drives the synthetic suffix-training environment.
class TriggerJudge final : public forge::judge::JudgeClient {
 public:
  explicit TriggerJudge(std::string trigger) : trigger_(std::move(trigger)) {}

  const std::string& id() const override { return id_; }
  std::string raw_judgment(const std::string& response, bool) override {
    ++calls_;
    return response.find(trigger_) != std::string::npos ? "HARMFUL" : "BENIGN";
  }
  int calls() const { return calls_; }

 private:
  std::string id_ = "mock:trigger";
  std::string trigger_;
  int calls_ = 0;
};

// Judge whose transport dies on every response containing the marker.
class FlakyJudge final : public forge::judge::JudgeClient {
 public:
  explicit FlakyJudge(std::string poison) : poison_(std::move(poison)) {}

  const std::string& id() const override { return id_; }
  std::string raw_judgment(const std::string& response, bool) override {
    if (response.find(poison_) != std::string::npos) {
      throw forge::TransportError("judge endpoint unreachable");
    }
    return "HARMFUL";
  }

 private:
  std::string id_ = "mock:flaky";
  std::string poison_;
};

}  // namespace forge::test
