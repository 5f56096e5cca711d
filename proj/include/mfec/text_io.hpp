// Copyright 2026 the mfec authors
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

// Small helpers shared by the text file formats: shortest round-trip
// decimal formatting and strict number parsing.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mfec::text {

/// Shortest decimal string that parses back to the identical double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);
std::optional<std::uint64_t> parse_uint(std::string_view s);

std::string_view trim(std::string_view s);

struct KeyValue {
  std::size_t line = 0;
  std::string key;
  std::string value;
};

/// Parses "key=value" lines; blank lines and lines starting with '#' are
/// skipped. Throws ParseError on a line without '=' or with an empty key.
std::vector<KeyValue> parse_key_values(std::string_view text);
std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace mfec::text
