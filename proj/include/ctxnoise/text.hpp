// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ctxnoise::text {

/// Unicode NFC normalization of UTF-8 text. Invalid UTF-8 is replaced, not rejected.
std::string nfc(std::string_view utf8);

/// Full Unicode case folding (after NFC).
std::string casefold(std::string_view utf8);

std::string trim(std::string_view s);

/// Whitespace split after detaching punctuation characters into their own tokens.
std::vector<std::string> tokenize(std::string_view utf8);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Code points in UTF-8 text; used to align plain-text tables.
size_t display_width(std::string_view s);

/// Case-folded substring test after NFC on both sides.
bool contains_folded(std::string_view haystack, std::string_view needle);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// Replaces every `{name}` slot with vars[name]. Unknown slots are left verbatim.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

std::string read_file(const std::string& path);

/// Write via temp file + rename so readers never see a partial artifact.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace ctxnoise::text
