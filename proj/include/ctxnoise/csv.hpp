// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ctxnoise::csv {

struct Row {
  size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain the delimiter, doubled quotes and
// newlines. Blank lines are skipped.
std::vector<Row> parse(std::string_view data, char delimiter = ',');

std::string escape(std::string_view field, char delimiter = ',');

std::string format_row(const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace ctxnoise::csv
