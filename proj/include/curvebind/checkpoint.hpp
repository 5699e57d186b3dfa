#pragma once

#include <string>

#include "curvebind/params.hpp"

namespace curvebind {

struct Checkpoint {
    ModelConfig config;
    ParamStore params;
};

// Versioned JSON parameter tree keyed by tensor name with shape metadata.
// save -> load round-trips bit-exactly.
std::string checkpoint_to_string(const Checkpoint& ckpt);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
Checkpoint checkpoint_from_string(const std::string& text);

} // namespace curvebind
