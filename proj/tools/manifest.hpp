#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace exgrg::cli {

/// 64-bit FNV-1a over the file's bytes.
std::uint64_t file_digest(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::optional<std::string> config_text;
  std::optional<std::uint64_t> seed;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output;
  std::vector<std::pair<std::string, std::string>> options;
};

/// Files of a graph directory that exist (edges, features, labels).
std::vector<std::filesystem::path> graph_inputs(const std::filesystem::path& dir);

/// Writes <output>/manifest.json, creating the directory. Must run before any
/// computation so a crashed run still records what it was asked to do.
void write_manifest(const RunManifest& m);

}  // namespace exgrg::cli
