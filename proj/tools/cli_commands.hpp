#pragma once

#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "cli_config.hpp"

namespace powertrace::cli {

// Returns the summary printed to stdout; artifacts go through the manifest.
using Handler = std::function<nlohmann::json(const Config&, Manifest&, const std::string& out_dir)>;

struct Command {
    std::string name;
    std::string description;
    CommandKeys keys;
    Handler run;
};

const std::vector<Command>& commands();

}  // namespace powertrace::cli
