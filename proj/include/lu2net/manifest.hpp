/*
 * Copyright 2026 the lu2net authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <ctime>
#include <fstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lu2net/common.hpp"

namespace lu2net::manifest {

/// Ordered key/value run record written alongside every artifact-producing
/// command's outputs. Plain "key = value" text with an embedded config
/// snapshot block.
class RunManifest {
public:
  explicit RunManifest(std::string command) : command_(std::move(command)) {}

  void add(const std::string& key, const std::string& value) { fields_.emplace_back(key, value); }

  template <typename V>
  void add_value(const std::string& key, const V& v) {
    add(key, strcat_(v));
  }

  void add_block(const std::string& key, const std::string& text) { blocks_.emplace_back(key, text); }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError(strcat_("cannot open ", path, " for writing"));
    f << "command = " << command_ << "\n";
    for (const auto& [k, v] : fields_) f << k << " = " << v << "\n";
    for (const auto& [k, text] : blocks_) {
      f << "\n# --- " << k << " ---\n" << text;
      if (!text.empty() && text.back() != '\n') f << "\n";
    }
  }

private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> fields_;
  std::vector<std::pair<std::string, std::string>> blocks_;
};

inline std::string hardware_description() {
  std::string model = "unknown-cpu";
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        model = line.substr(colon + 1);
        while (!model.empty() && (model.front() == ' ' || model.front() == '\t')) model.erase(model.begin());
      }
      break;
    }
  }
  return strcat_(model, " (", std::thread::hardware_concurrency(), " hw threads)");
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline std::string build_id() {
#ifdef LU2NET_BUILD_ID
  return LU2NET_BUILD_ID;
#else
  return "unknown";
#endif
}

}  // namespace lu2net::manifest
