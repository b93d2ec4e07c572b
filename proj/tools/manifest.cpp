#include "manifest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "exgrg/error.hpp"

namespace exgrg::cli {

std::uint64_t file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for hashing");
  std::uint64_t h = 14695981039346656037ULL;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::vector<std::filesystem::path> graph_inputs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const char* name : {"edges.txt", "features.csv", "labels.txt"})
    if (std::filesystem::exists(dir / name)) out.push_back(dir / name);
  return out;
}

void write_manifest(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "exgrg";
  j["version"] = EXGRG_VERSION;
  j["command"] = m.command;
  j["seed"] = m.seed ? nlohmann::ordered_json(*m.seed) : nlohmann::ordered_json(nullptr);
  j["config"] = m.config_text ? nlohmann::ordered_json(*m.config_text) : nlohmann::ordered_json(nullptr);
  j["options"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.options) j["options"][k] = v;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& p : m.inputs) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(file_digest(p)));
    j["inputs"].push_back({{"path", p.string()}, {"fnv1a64", hex}});
  }
  j["output"] = m.output.string();

  std::filesystem::create_directories(m.output);
  std::ofstream out(m.output / "manifest.json");
  if (!out) throw DataError("cannot write " + (m.output / "manifest.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace exgrg::cli
