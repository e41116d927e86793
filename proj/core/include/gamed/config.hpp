#pragma once

// Run configuration: a TOML-style key-value file covering data generation,
// model shape, training, ablation flags and the seed, with command-line
// overrides applied afterwards (flag wins).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gamed/pipeline.hpp"
#include "gamed/synthdata.hpp"

namespace gamed {

struct RunConfig {
    GenSpec gen;
    ModelConfig model;
    TrainConfig train;
    std::uint64_t seed = 17;

    // Wires the shared fields (seed, vocab, grid, token budget) across the
    // sub-configs and validates everything.
    void finalize();
};

// Parses `[section]` headers, `key = value` lines and `#` comments into
// flat "section.key" entries.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text, const std::string& origin);

// Applies one flat key to the config; unknown keys or bad values raise
// ConfigError naming the key.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig run_config_from_entries(const std::map<std::string, std::string>& entries);
RunConfig run_config_from_file(const std::string& path);

}  // namespace gamed
