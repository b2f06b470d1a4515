#pragma once

// Flat key=value run configuration. Every key has a default; files and
// command-line overrides go through the same setters.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "colsim/engine.hpp"

namespace colsim
{

struct Settings
{
    SimConfig sim;
    std::filesystem::path output_dir = ".";
};

class ConfigError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

struct ConfigKey
{
    std::string_view name;
    std::string_view description;
    // Renders the current value of the key from `s`.
    std::string (*get)(const Settings &s);
    void (*set)(Settings &s, std::string_view value);
};

/// Every recognized key, in documentation order.
const std::vector<ConfigKey> &config_keys();

/// Applies one key. Unknown keys and malformed values throw ConfigError.
void apply_setting(Settings &s, std::string_view key, std::string_view value);

/// Applies "key=value" lines; blank lines and '#' comments are skipped.
void apply_config_text(Settings &s, std::string_view text, std::string_view origin = "<config>");
void apply_config_file(Settings &s, const std::filesystem::path &path);

/// "WxH", e.g. "24x24".
std::pair<std::uint32_t, std::uint32_t> parse_grid(std::string_view text);

/// Comma-separated positive integers, e.g. "1,2,4".
std::vector<std::uint32_t> parse_worker_list(std::string_view text);

/// One "key (default: value)  description" line per key.
std::string describe_keys();

} // namespace colsim
