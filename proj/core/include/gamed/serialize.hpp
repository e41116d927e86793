#pragma once

// Versioned flat model dump: magic "GAMD", format version, config hash and
// text, then named parameter blocks. Reload is bit-exact within one build.

#include <cstdint>
#include <string>

#include "gamed/pipeline.hpp"

namespace gamed {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Canonical key=value text describing the model architecture; its FNV-1a
// hash is stored alongside for quick compatibility checks.
std::string model_config_text(const ModelConfig& cfg);
ModelConfig model_config_from_text(const std::string& text);

void save_model(const std::string& path, GamedModel& model);
GamedModel load_model(const std::string& path);

}  // namespace gamed
