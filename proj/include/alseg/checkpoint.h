#pragma once

#include <filesystem>
#include <string>

#include "alseg/params.h"

namespace alseg {

// Text checkpoint: a version line, the parameter count, then per parameter a
// "name rows cols" header followed by one line of %.17g values per row.
// Parameters appear in registration order, so identical models serialise to
// identical bytes.
inline constexpr const char* kCheckpointMagic = "alseg-checkpoint 1";

std::string serialize_parameters(const ParameterSet& params);
// Loads into an existing set; names, order and shapes must match exactly.
void deserialize_parameters(const std::string& text, ParameterSet& params);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

}  // namespace alseg
