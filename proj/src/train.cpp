#include "quarc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>

#include "json.hpp"
#include "quarc/error.hpp"
#include "quarc/metrics.hpp"
#include "quarc/rng.hpp"

namespace quarc {

double softmax_bce_loss(std::span<const double> probabilities, int label) {
  if (probabilities.size() != 2) throw DimensionError("softmax_bce_loss: expected two probabilities");
  if (label != 0 && label != 1) throw DataError("softmax_bce_loss: label must be 0 or 1, got " + std::to_string(label));
  return -std::log(std::max(probabilities[static_cast<std::size_t>(label)], 1e-12));
}

Adam::Adam(const ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.push_back(Tensor::zeros_like(p.value));
    v_.push_back(Tensor::zeros_like(p.value));
  }
}

void Adam::step(ParameterSet& params, const Gradients& grads) {
  if (grads.size() != params.size() || m_.size() != params.size())
    throw ContractError("adam: gradients are not aligned with the parameters");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    for (double g : grads[p].data())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + params[p].name + "'");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    auto theta = params[p].value.data();
    auto g = grads[p].data();
    auto m = m_[p].data();
    auto v = v_[p].data();
    for (std::size_t e = 0; e < theta.size(); ++e) {
      m[e] = beta1_ * m[e] + (1.0 - beta1_) * g[e];
      v[e] = beta2_ * v[e] + (1.0 - beta2_) * g[e] * g[e];
      theta[e] -= lr_ * (m[e] / c1) / (std::sqrt(v[e] / c2) + eps_);
    }
  }
}

EvalMetrics evaluate(const Model& model, const std::vector<EncodedSample>& samples, int threads) {
  if (samples.empty()) throw DataError("evaluate: empty split");
  const std::size_t n = samples.size();
  std::vector<double> score(n), loss(n);
  std::vector<int> labels(n), correct(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto p = model.predict(samples[i]);
      score[i] = p[1];
      labels[i] = samples[i].label;
      loss[i] = softmax_bce_loss(p, samples[i].label);
      correct[i] = (p[1] > p[0] ? 1 : 0) == samples[i].label;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  EvalMetrics m;
  for (std::size_t i = 0; i < n; ++i) {
    m.loss += loss[i];
    m.accuracy += correct[i];
  }
  m.loss /= static_cast<double>(n);
  m.accuracy /= static_cast<double>(n);
  try {
    m.roc_auc = roc_auc(score, labels);
    m.average_precision = average_precision(score, labels);
  } catch (const MetricError&) {
    // single-class split: ranking metrics are undefined
  }
  return m;
}

std::vector<double> TrainReport::loss_curve() const {
  std::vector<double> out;
  for (const auto& e : epochs) out.push_back(e.loss);
  return out;
}

namespace {

nlohmann::json metrics_json(const EvalMetrics& m) {
  nlohmann::json j;
  j["loss"] = m.loss;
  j["accuracy"] = m.accuracy;
  j["roc_auc"] = m.roc_auc ? nlohmann::json(*m.roc_auc) : nlohmann::json(nullptr);
  j["average_precision"] = m.average_precision ? nlohmann::json(*m.average_precision) : nlohmann::json(nullptr);
  return j;
}

constexpr std::size_t kChunks = 8;

}  // namespace

std::string TrainReport::to_json() const {
  nlohmann::json j;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs) j["epochs"].push_back({{"loss", e.loss}, {"seconds", e.seconds}, {"val", metrics_json(e.val)}});
  j["train"] = metrics_json(train);
  j["test"] = metrics_json(test);
  return j.dump(2);
}

TrainReport train_loop(Model& model, const Dataset& ds, const TrainOptions& opts) {
  const ModelConfig& cfg = model.config();
  const auto train_idx = ds.indices(Split::train);
  const auto val_idx = ds.indices(Split::val);
  const auto test_idx = ds.indices(Split::test);
  if (train_idx.empty() || val_idx.empty() || test_idx.empty())
    throw DataError("dataset needs non-empty train, val and test splits (sizes " + std::to_string(train_idx.size()) +
                    "/" + std::to_string(val_idx.size()) + "/" + std::to_string(test_idx.size()) + ")");
  const auto train = encode_samples(ds, train_idx, cfg);
  const auto val = encode_samples(ds, val_idx, cfg);
  const auto test = encode_samples(ds, test_idx, cfg);

  ParameterSet& params = model.params();
  Adam adam(params, cfg.lr);
  std::vector<Gradients> chunk_grads(kChunks, Gradients(params));
  Gradients total(params);
  std::vector<double> sample_loss(train.size());
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(mix_keys(cfg.seed, fnv1a("shuffle")));

  TrainReport report;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    const std::uint64_t epoch_key = mix_keys(cfg.seed, epoch + 1);
    double epoch_loss = 0.0;

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch);
      const std::size_t size = end - begin;
      std::vector<std::exception_ptr> errors(kChunks);
#pragma omp parallel for schedule(static, 1) num_threads(opts.threads)
      for (std::size_t c = 0; c < kChunks; ++c) {
        try {
          Gradients& g = chunk_grads[c];
          g.zero();
          for (std::size_t k = begin + size * c / kChunks; k < begin + size * (c + 1) / kChunks; ++k) {
            const EncodedSample& s = train[order[k]];
            Tape tape(&params);
            const NodeId z = model.logits(tape, s, Mode::train, mix_keys(epoch_key, s.key));
            const NodeId l = ops::softmax_cross_entropy(tape, z, s.label);
            sample_loss[order[k]] = tape.value(l)[0];
            tape.backward(l, g);
          }
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      total.zero();
      for (const auto& g : chunk_grads) total.add(g);
      total.scale(1.0 / static_cast<double>(size));
      adam.step(params, total);
      for (std::size_t k = begin; k < end; ++k) epoch_loss += sample_loss[order[k]];
    }

    EpochRecord rec;
    rec.loss = epoch_loss / static_cast<double>(train.size());
    if (!std::isfinite(rec.loss)) throw NumericError("training loss became non-finite in epoch " + std::to_string(epoch + 1));
    rec.val = evaluate(model, val, opts.threads);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(epoch, rec);
  }
  report.train = evaluate(model, train, opts.threads);
  report.test = evaluate(model, test, opts.threads);
  return report;
}

}  // namespace quarc
