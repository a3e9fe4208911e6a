#ifndef SPINCUT_HARNESS_OUTPUT_HPP
#define SPINCUT_HARNESS_OUTPUT_HPP

// Result files, checksums and run manifests. Runners build their files in
// memory; nothing touches the disk until `persist`.

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "spincut/errors.hpp"

namespace spincut::harness {

inline constexpr std::string_view kVersion = "spincut 1.0.0";

struct Artifact {
  std::string name;
  std::string content;
};

struct RunResult {
  std::vector<Artifact> files;
  std::string summary;            // printed on stdout
  nlohmann::json results = nlohmann::json::object();  // headline numbers for the manifest
  nlohmann::json seeds = nlohmann::json::object();

  const Artifact* find(std::string_view name) const {
    for (const Artifact& a : files) {
      if (a.name == name) return &a;
    }
    return nullptr;
  }
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest round-trip text for a double.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_nums(const std::vector<double>& values, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += num(values[i]);
  }
  return out;
}

/// Creates `dir` if needed and checks a file can be written there.
inline void probe_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".spincut-probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "ok")) throw IoError("output directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point when) {
  const std::time_t t = std::chrono::system_clock::to_time_t(when);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json checksums(const RunResult& result) {
  nlohmann::json out = nlohmann::json::object();
  for (const Artifact& a : result.files) {
    out[a.name] = {{"fnv1a64", hex64(fnv1a64(a.content))}, {"bytes", a.content.size()}};
  }
  return out;
}

inline nlohmann::json make_manifest(const nlohmann::json& config, const RunResult& result,
                                    std::chrono::system_clock::time_point started, double wall_seconds) {
  return {{"version", kVersion},
          {"config", config},
          {"started", utc_timestamp(started)},
          {"wall_clock_seconds", wall_seconds},
          {"outputs", checksums(result)},
          {"seeds", result.seeds},
          {"results", result.results}};
}

/// Writes every artifact plus manifest.json into `dir`.
inline void persist(const std::filesystem::path& dir, const RunResult& result, const nlohmann::json& manifest) {
  probe_writable(dir);
  auto write = [&](const std::string& name, std::string_view content) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("failed writing " + (dir / name).string());
  };
  for (const Artifact& a : result.files) write(a.name, a.content);
  write("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace spincut::harness

#endif  // SPINCUT_HARNESS_OUTPUT_HPP
