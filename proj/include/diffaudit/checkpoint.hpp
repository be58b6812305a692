#pragma once

#include <string>
#include <utility>
#include <vector>

#include "diffaudit/denoiser.hpp"
#include "diffaudit/schedule.hpp"

namespace diffaudit {

// Little-endian binary checkpoint:
//   magic "DFA1"
//   u32 format version (= 1)
//   u32 T, f64 beta_min, f64 beta_max        (schedule parameters)
//   u32 height, width, channels, embed_dim, hidden_dim
//   f64 parameters in declaration order (w1, b1, w2, b2, w3, b3)
void save_checkpoint(const Denoiser& model, const NoiseSchedule& sched, const std::string& path);
std::pair<Denoiser, NoiseSchedule> load_checkpoint(const std::string& path);

// CSV loss curve: "epoch,loss", one row per epoch.
void save_loss_csv(const std::vector<double>& loss_curve, const std::string& path);

}  // namespace diffaudit
