#include "quarc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "quarc/error.hpp"
#include "quarc/rng.hpp"

namespace quarc {

double GradCheckReport::max_rel_err() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.max_rel_err);
  return m;
}

double relative_error(double analytic, double numeric, double floor) {
  const double den = std::max({std::abs(analytic), std::abs(numeric), floor});
  const double err = std::abs(analytic - numeric) / den;
  return std::isnan(err) ? INFINITY : err;
}

namespace {

double loss_value(const Tape& tape, NodeId loss) {
  const Tensor& v = tape.value(loss);
  if (v.real_dim() != 1) throw ContractError("gradient check: loss must be a scalar");
  return v[0];
}

// Central difference on one scalar slot.
template <typename Eval>
double central_difference(double& slot, double step, Eval&& eval) {
  const double saved = slot;
  const double h = step * std::max(1.0, std::abs(saved));
  slot = saved + h;
  const double up = eval();
  slot = saved - h;
  const double down = eval();
  slot = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

GradCheckReport finite_diff_check(ParameterSet& params, const LossFn& loss, const FdOptions& opts) {
  Gradients analytic(params);
  {
    Tape tape(&params);
    tape.backward(loss(tape), analytic);
  }
  auto eval = [&] {
    Tape tape(&params);
    const NodeId l = loss(tape);
    return loss_value(tape, l);
  };
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    auto values = params[p].value.data();
    std::vector<std::size_t> slots(values.size());
    std::iota(slots.begin(), slots.end(), 0);
    if (opts.max_scalars > 0 && slots.size() > opts.max_scalars) {
      Rng rng(mix_keys(opts.seed, fnv1a(params[p].name)));
      for (std::size_t i = 0; i < opts.max_scalars; ++i) std::swap(slots[i], slots[i + rng.below(slots.size() - i)]);
      slots.resize(opts.max_scalars);
      std::sort(slots.begin(), slots.end());
    }
    BlockError block{params[p].name, slots.size(), 0.0};
    for (std::size_t s : slots) {
      const double numeric = central_difference(values[s], opts.step, eval);
      block.max_rel_err = std::max(block.max_rel_err, relative_error(analytic[p][s], numeric));
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace quarc
