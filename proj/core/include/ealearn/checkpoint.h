#pragma once

#include <filesystem>
#include <string>

#include "ealearn/model.h"

namespace ealearn {

inline constexpr int kCheckpointVersion = 1;

// Self-describing JSON blob: format tag, version, config, epoch, embeddings,
// optimizer state and the training random stream. Doubles round-trip exactly.
std::string serialize_checkpoint(const ModelState& state);
ModelState deserialize_checkpoint(const std::string& blob);

void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace ealearn
