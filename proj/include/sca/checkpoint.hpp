#pragma once

#include <string>

#include "sca/dpmix.hpp"
#include "sca/model.hpp"

namespace sca {

// Versioned JSON checkpoint: model config, every layer's named arrays, and
// the mixture state.
void save_checkpoint(const std::string& path, const SurvivalModel& model,
                     const MixtureState& mixture);

struct Checkpoint {
    SurvivalModel model;
    MixtureState mixture;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace sca
