#pragma once

#include <string>

#include <json.hpp>

#include "sguda/pipeline.hpp"

namespace sguda {

// Stable-key-order JSON of the full effective configuration. The document is
// the interchange format for `--config` files and `config_resolved.json`.
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);

// Overlay semantics: fields present in `j` replace those in `base`, the rest
// keep their current values. Unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

PipelineConfig load_config_file(const std::string& path, PipelineConfig base = {});

// FNV-1a 64-bit hash of the canonical JSON document, hex encoded.
std::string config_fingerprint(const PipelineConfig& cfg);

}  // namespace sguda
