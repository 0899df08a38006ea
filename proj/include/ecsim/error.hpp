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

#ifndef ECSIM_ERROR_HPP_
#define ECSIM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace ecsim {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text in a tensor/weight/config payload.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Malformed wire frame (bad length, unknown kind, truncated header).
class WireFormatError : public Error {
 public:
  using Error::Error;
};

/// Edge<->cloud exchange failed; carries the sample index when known.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Latency budget cannot be met by any routing mix.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace ecsim

#endif  // ECSIM_ERROR_HPP_
