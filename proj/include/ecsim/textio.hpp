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

#ifndef ECSIM_TEXTIO_HPP_
#define ECSIM_TEXTIO_HPP_

#include <cstdint>
#include <string>
#include <string_view>

namespace ecsim {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

/// Fixed-point form used in CSV exports.
std::string format_fixed(double v, int digits = 6);

/// Whitespace-separated token scanner over an in-memory payload.
/// Throws ParseError on malformed or missing tokens.
class TokenStream {
 public:
  explicit TokenStream(std::string_view text) : text_(text) {}

  bool done();
  std::string_view next_token();
  double next_double();
  long long next_int();

  /// Remaining unscanned text (diagnostics).
  std::string_view rest() const { return text_.substr(pos_); }

 private:
  void skip_ws();
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace ecsim

#endif  // ECSIM_TEXTIO_HPP_
