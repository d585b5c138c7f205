// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// key=value configuration files with [section] headers.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "fusionpool/error.hpp"

namespace fusionpool {

class ConfigFile {
 public:
  // Lines starting with '#' or ';' are comments. Keys before the first
  // section header belong to section "".
  static ConfigFile parse(std::string_view text, const std::string& origin = "<config>") {
    ConfigFile cfg;
    std::string section;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      auto line = std::string(text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos));
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      ++line_no;
      line = trim(line);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          fail(ErrorCode::kFormat, origin + ":" + std::to_string(line_no) + ": unterminated section");
        }
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        fail(ErrorCode::kFormat, origin + ":" + std::to_string(line_no) + ": expected key=value");
      }
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) fail(ErrorCode::kFormat, origin + ":" + std::to_string(line_no) + ": empty key");
      cfg.values_[section][key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "config file '" + path + "' not found");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    if (s == values_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  const std::map<std::string, std::string>& section(const std::string& name) const {
    static const std::map<std::string, std::string> empty;
    const auto s = values_.find(name);
    return s == values_.end() ? empty : s->second;
  }

  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return values_; }

 private:
  static std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace fusionpool
