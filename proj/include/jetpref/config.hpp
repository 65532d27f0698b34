#pragma once

#include "jetpref/experiment.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace jetpref {

struct ConfigKey {
    std::string key;
    std::string type;
    std::string help;
};

/// Every settable key, in a fixed order.
const std::vector<ConfigKey>& config_keys();

/// Throws ConfigError naming the key when it is unknown or the value does not parse.
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentConfig& cfg, std::string_view key);

/// Flat "key = value" lines; '#' starts a comment; "[section]" prefixes the
/// following keys with "section.".
ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {});

/// Snapshot of every key, loadable by parse_config_text.
std::string config_to_text(const ExperimentConfig& cfg);
/// Key listing with types, defaults and descriptions.
std::string config_help_text();

}  // namespace jetpref
