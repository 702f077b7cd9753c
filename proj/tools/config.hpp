#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace margmc::cli {

struct KeySpec {
  std::string section;
  std::string key;
  std::string default_value;
  std::string help;
  bool input_path = false;  // resolved against the config file's directory

  std::string name() const { return section + "." + key; }
};

/// Every recognised configuration key, in echo order.
const std::vector<KeySpec>& config_keys();

/// Sections written to run metadata that the loader skips.
bool is_metadata_section(const std::string& section);

/// Resolved configuration: defaults, then the INI file, then overrides.
class Config {
 public:
  /// Throws InputError on unreadable files, unknown sections or keys, and
  /// duplicate keys.
  static Config load(const std::optional<std::filesystem::path>& file,
                     const std::map<std::string, std::string>& overrides);

  bool has(const std::string& name) const;  // set to a non-empty value
  const std::string& str(const std::string& name) const;
  long long integer(const std::string& name) const;
  double real(const std::string& name) const;
  bool boolean(const std::string& name) const;
  std::vector<double> reals(const std::string& name) const;
  std::vector<std::string> words(const std::string& name) const;

  /// Writes every key as INI sections (a valid config file).
  void write_ini(std::ostream& out) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace margmc::cli
