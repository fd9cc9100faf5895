// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxnoise::templates {

/// Shipped template text by name (the file stem under data/templates).
std::string builtin(std::string_view name);

/// `<dir>/<name>.txt` when a directory is given and the file exists,
/// otherwise the shipped text.
std::string load(std::string_view name, const std::optional<std::string>& dir);

std::vector<std::string> names();

}  // namespace ctxnoise::templates
