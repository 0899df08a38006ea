// Copyright 2026 The ecsim Authors
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

#include "ecsim/textio.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>

#include "ecsim/error.hpp"

namespace ecsim {

std::string format_double(double v) {
  char buf[64];
  // %.15g is exact for most values; widen until the round trip is exact.
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    auto [p, ec] = std::from_chars(buf, buf + std::strlen(buf), back);
    (void)p;
    if (ec == std::errc() && back == v) return buf;
  }
  return buf;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void TokenStream::skip_ws() {
  while (pos_ < text_.size() &&
         std::isspace(static_cast<unsigned char>(text_[pos_]))) {
    ++pos_;
  }
}

bool TokenStream::done() {
  skip_ws();
  return pos_ >= text_.size();
}

std::string_view TokenStream::next_token() {
  skip_ws();
  if (pos_ >= text_.size()) throw ParseError("unexpected end of payload");
  const std::size_t start = pos_;
  while (pos_ < text_.size() &&
         !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
    ++pos_;
  }
  return text_.substr(start, pos_ - start);
}

double TokenStream::next_double() {
  const std::string_view tok = next_token();
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError("bad numeric token '" + std::string(tok) + "'");
  }
  return v;
}

long long TokenStream::next_int() {
  const std::string_view tok = next_token();
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError("bad integer token '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace ecsim
