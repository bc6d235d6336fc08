#ifndef PADIFF_CHECKPOINT_HPP
#define PADIFF_CHECKPOINT_HPP

// Checkpoints are npz containers: one named tensor per parameter plus a
// "header.json" entry (architecture, schedule, training step) that fully
// reconstructs the model.

#include "padiff/unet.hpp"

#include <string>

namespace padiff {

struct CheckpointInfo {
    UNetConfig arch;
    int T = 1000;
    double beta_1 = 1e-4;
    double beta_T = 0.02;
    long train_step = 0;
};

// Atomic: writes to a temp file, then renames.
void save_checkpoint(const std::string& path, NoisePredictor<float>& model,
                     const CheckpointInfo& info);

NoisePredictor<float> load_checkpoint(const std::string& path,
                                      CheckpointInfo* info_out = nullptr);

}  // namespace padiff

#endif
