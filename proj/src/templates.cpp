// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/templates.hpp"

#include <filesystem>
#include <map>

#include "ctxnoise/error.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::templates {

namespace detail {
const std::map<std::string, std::string>& embedded();
}

std::string builtin(std::string_view name) {
  const auto& table = detail::embedded();
  auto it = table.find(std::string(name));
  if (it == table.end()) fail(ErrorKind::kConfig, "no such template: " + std::string(name));
  return it->second;
}

std::string load(std::string_view name, const std::optional<std::string>& dir) {
  if (dir) {
    const auto path = std::filesystem::path(*dir) / (std::string(name) + ".txt");
    if (std::filesystem::exists(path)) return text::read_file(path.string());
  }
  return builtin(name);
}

std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : detail::embedded()) out.push_back(k);
  return out;
}

}  // namespace ctxnoise::templates
