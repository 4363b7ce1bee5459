#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "visphrase/linalg.hpp"

namespace visphrase::tools {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double_or_die(const std::string& value, const std::string& where) {
  double out = 0.0;
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc() || ptr != last) {
    throw CliError(2, "config error: " + where + " is not a number: '" + value + "'");
  }
  return out;
}

long long parse_integer_or_die(const std::string& value, const std::string& where) {
  long long out = 0;
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc() || ptr != last) {
    throw CliError(2, "config error: " + where + " is not an integer: '" + value + "'");
  }
  return out;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string current;
  std::istringstream in(value);
  while (std::getline(in, current, ',')) parts.push_back(trim(current));
  return parts;
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(2, "config error: cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str(), path.parent_path(), path.string());
}

Config Config::from_text(const std::string& text, const std::filesystem::path& base_dir,
                         const std::string& origin) {
  Config cfg;
  cfg.base_dir_ = base_dir;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw CliError(2, "config error: " + where + ": malformed section header '" + t + "'");
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw CliError(2, "config error: " + where + ": expected 'key = value', got '" + t + "'");
    }
    if (section.empty()) {
      throw CliError(2, "config error: " + where + ": entry before any [section]");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw CliError(2, "config error: " + where + ": empty key");
    if (!cfg.sections_[section].emplace(key, value).second) {
      throw CliError(2, "config error: " + where + ": duplicate key '" + section + "." + key + "'");
    }
  }
  return cfg;
}

void Config::apply_override(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw CliError(2, "config error: --set expects section.key=value, got '" + spec + "'");
  }
  const std::string target = trim(spec.substr(0, eq));
  const auto dot = target.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == target.size()) {
    throw CliError(2, "config error: --set expects section.key=value, got '" + spec + "'");
  }
  set(target.substr(0, dot), target.substr(dot + 1), trim(spec.substr(eq + 1)));
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.find(key) != s->second.end();
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s != sections_.end()) {
    const auto k = s->second.find(key);
    if (k != s->second.end()) return k->second;
  }
  throw CliError(2, "config error: missing required key '" + section + "." + key + "'");
}

std::string Config::get_string_or(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

long long Config::get_integer(const std::string& section, const std::string& key) const {
  return parse_integer_or_die(get_string(section, key), section + "." + key);
}

long long Config::get_integer_or(const std::string& section, const std::string& key,
                                 long long fallback) const {
  return has(section, key) ? get_integer(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  return parse_double_or_die(get_string(section, key), section + "." + key);
}

double Config::get_double_or(const std::string& section, const std::string& key,
                             double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

bool Config::get_bool_or(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw CliError(2, "config error: " + section + "." + key + " must be true or false, got '" +
                        v + "'");
}

std::optional<double> Config::get_auto_or_double(const std::string& section,
                                                 const std::string& key) const {
  if (!has(section, key)) return std::nullopt;
  const std::string v = get_string(section, key);
  if (v == "auto") return std::nullopt;
  return parse_double_or_die(v, section + "." + key);
}

std::vector<int> Config::get_int_list(const std::string& section, const std::string& key) const {
  std::vector<int> out;
  for (const auto& part : split_list(get_string(section, key))) {
    out.push_back(static_cast<int>(parse_integer_or_die(part, section + "." + key)));
  }
  if (out.empty()) {
    throw CliError(2, "config error: " + section + "." + key + " must list at least one value");
  }
  return out;
}

std::vector<double> Config::get_double_list_or(const std::string& section, const std::string& key,
                                               std::vector<double> fallback) const {
  if (!has(section, key)) return fallback;
  std::vector<double> out;
  for (const auto& part : split_list(get_string(section, key))) {
    out.push_back(parse_double_or_die(part, section + "." + key));
  }
  return out;
}

std::filesystem::path Config::get_path(const std::string& section, const std::string& key) const {
  const std::filesystem::path p = get_string(section, key);
  return p.is_absolute() ? p : base_dir_ / p;
}

std::filesystem::path Config::get_input_path(const std::string& section,
                                             const std::string& key) const {
  const auto p = get_path(section, key);
  if (!std::filesystem::exists(p)) {
    throw CliError(2, "config error: " + section + "." + key + " points to a missing file: " +
                          p.string());
  }
  return p;
}

bool Config::has_input_path(const std::string& section, const std::string& key) const {
  return has(section, key) && std::filesystem::exists(get_path(section, key));
}

std::string Config::canonical_text() const {
  std::string out;
  for (const auto& [section, entries] : sections_) {
    for (const auto& [key, value] : entries) {
      out += section;
      out += '.';
      out += key;
      out += " = ";
      out += value;
      out += '\n';
    }
  }
  return out;
}

std::string Config::hash() const { return linalg::fnv1a64_hex(canonical_text()); }

}  // namespace visphrase::tools
