#pragma once

// Losses over a model's phase trajectory. An objective owns the time grid
// (times[0] is the initial time) and maps the B x P states at each time to a
// scalar loss plus a cotangent per time.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sonode/errors.hpp"
#include "sonode/ode.hpp"
#include "sonode/tensor.hpp"

namespace sonode {

class Objective {
 public:
  virtual ~Objective() = default;

  virtual const std::vector<double>& times() const = 0;

  /// Loss of the given states (one B x P tensor per time). When cotangents is
  /// non-null it receives dL/dstate per time (zero where unobserved). When
  /// extra_grad is non-null it receives the gradient of the loss-owned
  /// parameters.
  virtual double evaluate(const std::vector<Tensor>& states, std::vector<Tensor>* cotangents,
                          std::vector<double>* extra_grad = nullptr) const = 0;

  /// Parameters that live inside the loss (e.g. a classification readout).
  virtual std::size_t extra_count() const { return 0; }
  virtual std::vector<double> extra_params() const { return {}; }
  virtual void set_extra_params(std::span<const double> p) {
    if (!p.empty()) throw DimensionError("objective has no extra parameters");
  }
};

/// Mean squared error over the observed prefix of each state row.
struct MseResult {
  double loss = 0.0;
  std::vector<Tensor> cotangents;
};

/// targets[i] is B x m (or empty when time i is unobserved); predictions are
/// B x P with P >= m. Mean is over observed (time, sample, coordinate)
/// triples; cotangents are 2 (pred - target) / count on the observed block.
inline MseResult mse_loss(const std::vector<Tensor>& pred, const std::vector<Tensor>& targets) {
  if (pred.size() != targets.size())
    throw DimensionError("mse_loss: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (targets[i].empty()) continue;
    if (targets[i].rows() != pred[i].rows() || targets[i].cols() > pred[i].cols())
      throw DimensionError("mse_loss: target " + Tensor::shape_string(targets[i].shape()) +
                           " does not fit prediction " + Tensor::shape_string(pred[i].shape()));
    count += targets[i].size();
  }
  MseResult r;
  r.cotangents.reserve(pred.size());
  for (const auto& p : pred) r.cotangents.emplace_back(p.shape());
  if (count == 0) return r;
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Tensor& tg = targets[i];
    if (tg.empty()) continue;
    const std::size_t rows = tg.rows();
    const std::size_t m = tg.cols();
    const std::size_t p = pred[i].cols();
    for (std::size_t b = 0; b < rows; ++b)
      for (std::size_t j = 0; j < m; ++j) {
        const double e = pred[i][b * p + j] - tg[b * m + j];
        sum += e * e;
        r.cotangents[i][b * p + j] = 2.0 * e * inv;
      }
  }
  r.loss = sum * inv;
  return r;
}

class MseObjective : public Objective {
 public:
  /// targets has one entry per time; an empty Tensor marks an unobserved time.
  MseObjective(std::vector<double> times, std::vector<Tensor> targets)
      : times_(std::move(times)), targets_(std::move(targets)) {
    if (times_.size() != targets_.size()) throw DimensionError("MseObjective: times and targets differ in length");
    if (times_.empty()) throw DimensionError("MseObjective needs at least one time");
  }

  const std::vector<double>& times() const override { return times_; }
  const std::vector<Tensor>& targets() const noexcept { return targets_; }

  double evaluate(const std::vector<Tensor>& states, std::vector<Tensor>* cotangents,
                  std::vector<double>* extra_grad) const override {
    MseResult r = mse_loss(states, targets_);
    if (cotangents) *cotangents = std::move(r.cotangents);
    if (extra_grad) extra_grad->clear();
    return r.loss;
  }

 private:
  std::vector<double> times_;
  std::vector<Tensor> targets_;
};

/// Logistic cross-entropy with readout logit = w . z_final[0:r] + b.
struct XentResult {
  double loss = 0.0;
  Tensor state_cotangent;        // B x P
  std::vector<double> grad_readout;  // [w..., b]
};

inline XentResult xent_endpoint_loss(const Tensor& final_states, const std::vector<int>& labels,
                                     std::span<const double> readout) {
  const std::size_t batch = labels.size();
  if (batch == 0 || final_states.size() % batch != 0) throw DimensionError("xent: labels do not match states");
  const std::size_t p = final_states.size() / batch;
  if (readout.empty() || readout.size() - 1 > p) throw DimensionError("xent: readout wider than state");
  const std::size_t r = readout.size() - 1;
  XentResult out{0.0, Tensor(final_states.shape()), std::vector<double>(readout.size(), 0.0)};
  const double inv = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] != 0 && labels[b] != 1) throw ConfigError("xent labels must be 0 or 1");
    double logit = readout[r];
    for (std::size_t j = 0; j < r; ++j) logit += readout[j] * final_states[b * p + j];
    const double y = labels[b];
    // log(1 + e^l) - y l, evaluated stably.
    const double softplus = logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
    out.loss += (softplus - y * logit) * inv;
    const double sig = 1.0 / (1.0 + std::exp(-logit));
    const double gl = (sig - y) * inv;
    for (std::size_t j = 0; j < r; ++j) {
      out.state_cotangent[b * p + j] = gl * readout[j];
      out.grad_readout[j] += gl * final_states[b * p + j];
    }
    out.grad_readout[r] += gl;
  }
  return out;
}

/// Fraction of samples whose readout logit has the sign of its label.
inline double readout_accuracy(const Tensor& final_states, const std::vector<int>& labels,
                               std::span<const double> readout) {
  const std::size_t batch = labels.size();
  const std::size_t p = final_states.size() / batch;
  const std::size_t r = readout.size() - 1;
  std::size_t ok = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    double logit = readout[r];
    for (std::size_t j = 0; j < r; ++j) logit += readout[j] * final_states[b * p + j];
    if ((logit > 0.0) == (labels[b] == 1)) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(batch);
}

class XentObjective : public Objective {
 public:
  /// readout_width coordinates of the final state feed the readout.
  XentObjective(double t0, double t1, std::vector<int> labels, std::size_t readout_width)
      : times_{t0, t1}, labels_(std::move(labels)), readout_(readout_width + 1, 0.0) {}

  const std::vector<double>& times() const override { return times_; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  double evaluate(const std::vector<Tensor>& states, std::vector<Tensor>* cotangents,
                  std::vector<double>* extra_grad) const override {
    if (states.size() != times_.size()) throw DimensionError("xent objective expects states at t0 and t1");
    XentResult r = xent_endpoint_loss(states.back(), labels_, readout_);
    if (cotangents) {
      cotangents->clear();
      cotangents->emplace_back(states.front().shape());
      cotangents->push_back(std::move(r.state_cotangent));
    }
    if (extra_grad) *extra_grad = std::move(r.grad_readout);
    return r.loss;
  }

  double accuracy(const Tensor& final_states) const { return readout_accuracy(final_states, labels_, readout_); }

  std::size_t extra_count() const override { return readout_.size(); }
  std::vector<double> extra_params() const override { return readout_; }
  void set_extra_params(std::span<const double> p) override {
    if (p.size() != readout_.size()) throw DimensionError("readout parameter count mismatch");
    readout_.assign(p.begin(), p.end());
  }

 private:
  std::vector<double> times_;
  std::vector<int> labels_;
  std::vector<double> readout_;
};

}  // namespace sonode
