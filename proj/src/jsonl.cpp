// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/jsonl.hpp"

#include "ctxnoise/error.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::jsonl {

std::vector<Line> parse(std::string_view data, std::string_view source_name) {
  std::vector<Line> out;
  size_t start = 0;
  size_t number = 0;
  while (start <= data.size()) {
    size_t end = data.find('\n', start);
    if (end == std::string_view::npos) end = data.size();
    ++number;
    const std::string line = text::trim(data.substr(start, end - start));
    if (!line.empty()) {
      try {
        out.push_back(Line{number, json::parse(line)});
      } catch (const json::parse_error& e) {
        fail(ErrorKind::kValidation,
             std::string(source_name) + ":" + std::to_string(number) + ": malformed JSON: " + e.what());
      }
    }
    if (end == data.size()) break;
    start = end + 1;
  }
  return out;
}

std::vector<Line> read(const std::string& path) { return parse(text::read_file(path), path); }

std::string dump(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out.push_back('\n');
  }
  return out;
}

void write(const std::string& path, const std::vector<json>& records) { text::write_file_atomic(path, dump(records)); }

}  // namespace ctxnoise::jsonl
