// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace ctxnoise::jsonl {

using nlohmann::json;

struct Line {
  size_t number = 0;  // 1-based
  json value;
};

/// Parses every non-blank line. Malformed lines throw a validation error naming the line.
std::vector<Line> parse(std::string_view data, std::string_view source_name = "<input>");

std::vector<Line> read(const std::string& path);

std::string dump(const std::vector<json>& records);

/// Atomic write of one compact JSON object per line.
void write(const std::string& path, const std::vector<json>& records);

}  // namespace ctxnoise::jsonl
