// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ctxnoise {

// Broad failure classes. The CLI maps each onto a process exit code.
enum class ErrorKind {
  kConfig,      // bad configuration or arguments; exit 2
  kUpstream,    // model endpoint / scoring client failure; exit 3
  kValidation,  // data violates a schema or invariant; exit 4
  kIo,          // filesystem failure; exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kUpstream: return 3;
    case ErrorKind::kValidation:
    case ErrorKind::kIo: return 4;
  }
  return 1;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace ctxnoise
