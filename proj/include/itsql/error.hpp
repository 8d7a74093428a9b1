// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace itsql {

/// Error with a stable machine-readable kind ("QueryFailed", "UnknownNode", ...)
/// plus a human message. Tool dispatch renders these as observations instead of
/// letting them escape the session loop.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

}  // namespace itsql
