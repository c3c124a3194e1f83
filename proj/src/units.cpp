/*
 * Copyright 2026 The brsvd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>

#include "brsvd/ooc.hpp"

namespace brsvd {

std::uint64_t parse_bytes(const std::string& text) {
  std::string lowered;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (lowered == "unlimited" || lowered == "inf" || lowered == "none") return kUnlimitedBudget;
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(lowered, &pos);
  } catch (const std::exception&) {
    throw ConfigError("cannot parse byte count '" + text + "'");
  }
  const std::string suffix = lowered.substr(pos);
  double scale = 1.0;
  if (suffix.empty() || suffix == "b") scale = 1.0;
  else if (suffix == "k" || suffix == "kib") scale = 1024.0;
  else if (suffix == "m" || suffix == "mib") scale = 1024.0 * 1024.0;
  else if (suffix == "g" || suffix == "gib") scale = 1024.0 * 1024.0 * 1024.0;
  else if (suffix == "t" || suffix == "tib") scale = 1024.0 * 1024.0 * 1024.0 * 1024.0;
  else if (suffix == "kb") scale = 1e3;
  else if (suffix == "mb") scale = 1e6;
  else if (suffix == "gb") scale = 1e9;
  else if (suffix == "tb") scale = 1e12;
  else throw ConfigError("unknown byte suffix '" + suffix + "' in '" + text + "'");
  const double bytes = value * scale;
  if (!(bytes >= 1.0) || bytes > 1.8e19) throw ConfigError("byte count out of range: '" + text + "'");
  return static_cast<std::uint64_t>(std::llround(bytes));
}

std::string format_bytes(std::uint64_t bytes) {
  if (bytes == kUnlimitedBudget) return "unlimited";
  const char* units[] = {"B", "KiB", "MiB", "GiB", "TiB"};
  double v = static_cast<double>(bytes);
  int u = 0;
  while (v >= 1024.0 && u < 4) {
    v /= 1024.0;
    ++u;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, u == 0 ? "%.0f %s" : "%.2f %s", v, units[u]);
  return buf;
}

}  // namespace brsvd
