// uctc/utf8.h
//
// Copyright 2026 The uctc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "uctc/common.h"

namespace uctc {

// Splits a UTF-8 string into codepoints, each returned as the byte sequence
// of one codepoint. Throws Error on malformed input. Codepoint equality is
// byte equality; no normalization is applied.
inline std::vector<std::string> utf8_codepoints(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char b = static_cast<unsigned char>(s[i]);
    size_t len = 0;
    if (b < 0x80) {
      len = 1;
    } else if ((b & 0xe0) == 0xc0) {
      len = 2;
    } else if ((b & 0xf0) == 0xe0) {
      len = 3;
    } else if ((b & 0xf8) == 0xf0) {
      len = 4;
    } else {
      fail("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    require(i + len <= s.size(), "truncated UTF-8 sequence at offset " + std::to_string(i));
    for (size_t k = 1; k < len; ++k) {
      const unsigned char c = static_cast<unsigned char>(s[i + k]);
      require((c & 0xc0) == 0x80, "invalid UTF-8 continuation byte at offset " + std::to_string(i + k));
    }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace uctc
