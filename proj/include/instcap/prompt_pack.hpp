// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "instcap/error.hpp"
#include "instcap/text.hpp"

namespace instcap {

/// Named prompt templates loaded from `*.txt` files. Leading lines starting
/// with '#' are file headers and are dropped.
class PromptPack {
 public:
  PromptPack() = default;
  explicit PromptPack(std::map<std::string, std::string> templates) : templates_(std::move(templates)) {}

  static std::string strip_header(const std::string& content) {
    std::istringstream in(content);
    std::string line, out;
    bool in_header = true;
    while (std::getline(in, line)) {
      if (in_header && !line.empty() && line[0] == '#') continue;
      in_header = false;
      out += line + "\n";
    }
    return text::trim(out);
  }

  /// Loads every `*.txt` directly under `dir`, keyed by file stem.
  static PromptPack load(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw Error(ErrorKind::ConfigError, "prompt directory not found: " + dir.string());
    std::map<std::string, std::string> t;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
      std::ifstream in(entry.path());
      std::stringstream ss;
      ss << in.rdbuf();
      t[entry.path().stem().string()] = strip_header(ss.str());
    }
    return PromptPack(std::move(t));
  }

  void require(std::initializer_list<const char*> names) const {
    for (const char* n : names)
      if (!templates_.count(n)) throw Error(ErrorKind::ConfigError, std::string("prompt pack is missing ") + n + ".txt");
  }

  bool has(const std::string& name) const { return templates_.count(name) > 0; }

  const std::string& get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw Error(ErrorKind::ConfigError, "prompt pack is missing " + name + ".txt");
    return it->second;
  }

  std::string render(const std::string& name, const std::map<std::string, std::string>& vars = {}) const {
    return text::trim(text::render_template(get(name), vars));
  }

  /// Digest of names and contents, recorded next to outputs.
  std::string hash() const {
    std::string all;
    for (const auto& [k, v] : templates_) all += k + "\n" + v + "\n\x1e";
    return text::hex64(text::fnv1a64(all));
  }

  const std::map<std::string, std::string>& templates() const { return templates_; }

 private:
  std::map<std::string, std::string> templates_;
};

}  // namespace instcap
