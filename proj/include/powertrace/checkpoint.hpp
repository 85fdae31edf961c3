#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "powertrace/tensor.hpp"

namespace powertrace {

// Writes one little-endian float64 blob per tensor into `dir` and returns the
// manifest (names, shapes, files, init seed, step count).
nlohmann::json write_param_blobs(const ParamStore& store, const std::string& dir);
// Restores values into an already-built store whose layout must match the manifest.
void read_param_blobs(ParamStore& store, const nlohmann::json& manifest, const std::string& dir);

// Standalone checkpoint: `dir/params.json` plus blobs.
void save_params(const ParamStore& store, const std::string& dir);
void load_params(ParamStore& store, const std::string& dir);

}  // namespace powertrace
