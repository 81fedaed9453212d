#include "twa/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "twa/common.hpp"

namespace twa {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw UsageError("invalid value '" + value + "' for " + key);
  return out;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  return parse_key_values(in);
}

void take(KeyValues& kv, const std::string& key, int& out) {
  if (auto it = kv.find(key); it != kv.end()) {
    out = parse_number<int>(key, it->second);
    kv.erase(it);
  }
}

void take(KeyValues& kv, const std::string& key, double& out) {
  if (auto it = kv.find(key); it != kv.end()) {
    out = parse_number<double>(key, it->second);
    kv.erase(it);
  }
}

void take(KeyValues& kv, const std::string& key, bool& out) {
  if (auto it = kv.find(key); it != kv.end()) {
    const auto& v = it->second;
    if (v == "1" || v == "true") {
      out = true;
    } else if (v == "0" || v == "false") {
      out = false;
    } else {
      throw UsageError("invalid boolean '" + v + "' for " + key);
    }
    kv.erase(it);
  }
}

void take(KeyValues& kv, const std::string& key, std::uint64_t& out) {
  if (auto it = kv.find(key); it != kv.end()) {
    out = parse_number<std::uint64_t>(key, it->second);
    kv.erase(it);
  }
}

void take(KeyValues& kv, const std::string& key, std::string& out) {
  if (auto it = kv.find(key); it != kv.end()) {
    out = it->second;
    kv.erase(it);
  }
}

void require_consumed(const KeyValues& kv, const std::string& context) {
  if (!kv.empty()) throw UsageError("unknown key '" + kv.begin()->first + "' in " + context);
}

}  // namespace twa
