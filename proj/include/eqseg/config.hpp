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

#ifndef EQSEG_CONFIG_HPP_
#define EQSEG_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace eqseg {

// Flat `key = value` text: one pair per line, `#` starts a comment, blank
// lines ignored. Keys are kept in insertion order when formatting.
class KeyValues {
 public:
  static KeyValues Parse(const std::string& text, const std::string& origin);
  static KeyValues Load(const std::string& path);

  void Set(const std::string& key, const std::string& value);
  bool Has(const std::string& key) const;
  const std::string& Get(const std::string& key) const;

  std::string GetString(const std::string& key, const std::string& def) const;
  double GetDouble(const std::string& key, double def) const;
  std::int64_t GetInt(const std::string& key, std::int64_t def) const;
  std::vector<int> GetIntList(const std::string& key,
                              const std::vector<int>& def) const;

  // Keys that were never read through a getter.
  std::vector<std::string> UnusedKeys() const;

  std::string Format() const;
  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
  std::map<std::string, std::size_t> index_;
  mutable std::map<std::string, bool> used_;
  std::string origin_ = "<config>";
};

std::string FormatDouble(double v);

}  // namespace eqseg

#endif  // EQSEG_CONFIG_HPP_
