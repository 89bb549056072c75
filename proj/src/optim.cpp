#include "nae/optim.hpp"

#include <cmath>

namespace nae {

double Schedule::lr(std::int64_t step) const {
  if (total_steps <= 0) {
    throw std::invalid_argument("Schedule: total_steps must be positive");
  }
  if (step <= 0) {
    return 0.0;
  }
  if (step >= total_steps) {
    return 0.0;
  }
  const double t = static_cast<double>(step);
  const double total = static_cast<double>(total_steps);
  const double warm = warmup_fraction * total;
  if (t < warm) {
    return peak_lr * t / warm;
  }
  return peak_lr * (total - t) / (total - warm);
}

void adamw_step(std::vector<Parameter> &params, const Schedule &schedule, std::int64_t step,
                const AdamWConfig &cfg) {
  const double lr = schedule.lr(step);
  for (Parameter &p : params) {
    const Matrix g = p.tensor.grad();
    if (p.first_moment.rows() != g.rows() || p.first_moment.cols() != g.cols() ||
        p.second_moment.rows() != g.rows() || p.second_moment.cols() != g.cols()) {
      throw DimensionError("adamw_step: optimizer state shape mismatch for '" + p.name + "'");
    }
    ++p.step;
    p.first_moment = cfg.beta1 * p.first_moment + (1.0 - cfg.beta1) * g;
    p.second_moment = cfg.beta2 * p.second_moment + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
    Matrix &w = p.tensor.mutable_value();
    if (lr != 0.0) {
      if (p.decay && schedule.weight_decay != 0.0) {
        w *= 1.0 - lr * schedule.weight_decay;
      }
      w.array() -= lr * (p.first_moment.array() / c1) /
                   ((p.second_moment.array() / c2).sqrt() + cfg.eps);
    }
    p.tensor.zero_grad();
  }
}

} // namespace nae
