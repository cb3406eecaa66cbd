// Copyright 2026 The eqseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "eqseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eqseg/error.hpp"

namespace eqseg {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::Parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected `key = value`");
    }
    const std::string key = Trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (kv.Has(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key `" + key + "`");
    }
    kv.Set(key, Trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str(), path);
}

void KeyValues::Set(const std::string& key, const std::string& value) {
  auto it = index_.find(key);
  if (it != index_.end()) {
    items_[it->second].second = value;
    return;
  }
  index_[key] = items_.size();
  items_.emplace_back(key, value);
}

bool KeyValues::Has(const std::string& key) const {
  return index_.count(key) > 0;
}

const std::string& KeyValues::Get(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) {
    throw ConfigError(origin_ + ": missing key `" + key + "`");
  }
  used_[key] = true;
  return items_[it->second].second;
}

std::string KeyValues::GetString(const std::string& key,
                                 const std::string& def) const {
  return Has(key) ? Get(key) : def;
}

double KeyValues::GetDouble(const std::string& key, double def) const {
  if (!Has(key)) return def;
  const std::string& v = Get(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": `" + key + "` is not a number: " + v);
  }
}

std::int64_t KeyValues::GetInt(const std::string& key, std::int64_t def) const {
  if (!Has(key)) return def;
  const std::string& v = Get(key);
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(origin_ + ": `" + key + "` is not an integer: " + v);
  }
  return out;
}

std::vector<int> KeyValues::GetIntList(const std::string& key,
                                       const std::vector<int>& def) const {
  if (!Has(key)) return def;
  const std::string& v = Get(key);
  std::vector<int> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    int x = 0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || ec != std::errc() || p != item.data() + item.size()) {
      throw ConfigError(origin_ + ": `" + key +
                        "` must be a comma-separated integer list: " + v);
    }
    out.push_back(x);
  }
  return out;
}

std::vector<std::string> KeyValues::UnusedKeys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : items_) {
    if (!used_.count(k)) out.push_back(k);
  }
  return out;
}

std::string KeyValues::Format() const {
  std::string out;
  for (const auto& [k, v] : items_) out += k + " = " + v + "\n";
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char b2[64];
    std::snprintf(b2, sizeof(b2), "%.*g", prec, v);
    if (std::stod(b2) == v) return b2;
  }
  return buf;
}

}  // namespace eqseg
