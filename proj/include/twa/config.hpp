#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace twa {

/// Flat `key = value` file. '#' starts a comment; blank lines are skipped.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::string& path);

// Each take_* removes `key` when present and parses it into `out`;
// absent keys leave `out` unchanged. Parse failures throw UsageError.
void take(KeyValues& kv, const std::string& key, int& out);
void take(KeyValues& kv, const std::string& key, double& out);
void take(KeyValues& kv, const std::string& key, bool& out);
void take(KeyValues& kv, const std::string& key, std::uint64_t& out);
void take(KeyValues& kv, const std::string& key, std::string& out);

/// Throws UsageError naming the first leftover key.
void require_consumed(const KeyValues& kv, const std::string& context);

}  // namespace twa
