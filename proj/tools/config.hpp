#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace visphrase::tools {

// User-facing failure with a documented process exit code:
// 2 config error, 3 model/data mismatch, 4 alignment error.
class CliError : public std::runtime_error {
 public:
  CliError(int exit_code, const std::string& message)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

// Declarative run configuration: "[section]" headers with "key = value"
// entries, '#' comments, blank lines. One file drives every subcommand;
// each command validates the keys it needs before any computation.
// Getter failures throw CliError(2).
class Config {
 public:
  Config() = default;

  static Config load(const std::filesystem::path& path);
  static Config from_text(const std::string& text, const std::filesystem::path& base_dir,
                          const std::string& origin);

  // "section.key=value" from a --set flag; later overrides win.
  void apply_override(const std::string& spec);
  void set(const std::string& section, const std::string& key, const std::string& value);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const;
  long long get_integer(const std::string& section, const std::string& key) const;
  long long get_integer_or(const std::string& section, const std::string& key,
                           long long fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;
  // "auto" (or a missing key) selects automatic tuning; otherwise the
  // value must parse as a number.
  std::optional<double> get_auto_or_double(const std::string& section,
                                           const std::string& key) const;
  std::vector<int> get_int_list(const std::string& section, const std::string& key) const;
  std::vector<double> get_double_list_or(const std::string& section, const std::string& key,
                                         std::vector<double> fallback) const;

  // Resolved against the directory containing the config file.
  std::filesystem::path get_path(const std::string& section, const std::string& key) const;
  // Additionally requires the file to exist.
  std::filesystem::path get_input_path(const std::string& section, const std::string& key) const;
  bool has_input_path(const std::string& section, const std::string& key) const;

  // Sorted "section.key = value" lines; the identity the hash covers.
  std::string canonical_text() const;
  // FNV-1a 64 over canonical_text(), 16 hex digits.
  std::string hash() const;

  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::filesystem::path base_dir_;
  std::string origin_ = "<config>";
};

}  // namespace visphrase::tools
