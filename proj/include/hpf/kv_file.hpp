#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace hpf {

/// Flat `key = value` text. Whitespace around keys and values is trimmed;
/// blank lines and lines starting with '#' are skipped. Later duplicates win.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

}  // namespace hpf
