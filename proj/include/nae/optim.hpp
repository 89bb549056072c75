#pragma once

#include "nae/nn.hpp"

#include <cstdint>

namespace nae {

/// Linear warm-up to `peak_lr` over the first warmup_fraction of steps, then
/// linear decay to zero at `total_steps`.
struct Schedule {
  std::int64_t total_steps = 1;
  double warmup_fraction = 0.1;
  double peak_lr = 1e-3;
  double weight_decay = 0.01;

  double lr(std::int64_t step) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One decoupled-weight-decay Adam update with lr = schedule.lr(step).
/// Gradients are cleared afterwards. Parameters with `decay == false` skip the
/// weight-decay term.
void adamw_step(std::vector<Parameter> &params, const Schedule &schedule, std::int64_t step,
                const AdamWConfig &cfg = {});

} // namespace nae
