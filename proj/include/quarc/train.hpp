#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "quarc/model.hpp"

namespace quarc {

// −log(max(p[label], 1e-12)) for two class probabilities.
double softmax_bce_loss(std::span<const double> probabilities, int label);

class Adam {
 public:
  Adam(const ParameterSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // One bias-corrected update of every trainable parameter. Non-finite
  // gradients raise NumericError naming the parameter; nothing is updated.
  void step(ParameterSet& params, const Gradients& grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  // Unset when the split holds a single class.
  std::optional<double> roc_auc;
  std::optional<double> average_precision;
};

// Eval-mode pass; the ranking score is the class 1 probability.
EvalMetrics evaluate(const Model& model, const std::vector<EncodedSample>& samples, int threads = 1);

struct EpochRecord {
  double loss = 0.0;
  double seconds = 0.0;
  EvalMetrics val;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  EvalMetrics train;  // eval mode, after the last epoch
  EvalMetrics test;

  std::vector<double> loss_curve() const;
  std::string to_json() const;
};

struct TrainOptions {
  int threads = 1;
  std::function<void(std::size_t epoch, const EpochRecord&)> on_epoch;
};

// Mini-batch Adam on the train split with a seeded shuffle per epoch,
// validation metrics every epoch and final train/test metrics. Each batch
// is split into fixed chunks whose gradients are summed in order, so the
// result does not depend on the thread count.
TrainReport train_loop(Model& model, const Dataset& ds, const TrainOptions& opts = {});

}  // namespace quarc
