#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "causal_gcn/common.hpp"
#include "causal_gcn/params.hpp"

namespace causal_gcn {

struct TrainingRecord {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
};

// Adam over `epochs` passes of `train_idx`, keeping the parameters with the
// lowest validation loss. When `val_idx` is empty, the eval-mode training
// loss stands in for it.
//   step_fn(params, batch_idx, rng) -> {loss, gradients, ...}; may update buffers
//   eval_fn(params, idx) -> eval-mode loss
template <class Params, class StepFn, class EvalFn>
Params adam_train(Params params, const IndexList& train_idx, const IndexList& val_idx, int epochs,
                  int batch_size, const AdamSettings& settings, Rng& rng, StepFn&& step_fn,
                  EvalFn&& eval_fn, TrainingRecord& record) {
  Adam<Params> adam(params, settings);
  Params best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  IndexList order = train_idx;
  const std::size_t bs = batch_size > 0 ? static_cast<std::size_t>(batch_size) : order.size();
  const IndexList& monitor = val_idx.empty() ? train_idx : val_idx;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (bs < order.size()) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const IndexList batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(std::min(start + bs, order.size())));
      auto result = step_fn(params, batch, rng);
      if (!std::isfinite(result.loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += result.loss * static_cast<double>(batch.size());
      adam.step(params, result.gradients);
    }
    record.train_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(1, order.size())));
    const double val = eval_fn(params, monitor);
    if (!std::isfinite(val)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    record.val_loss.push_back(val);
    if (val < best_loss) {
      best_loss = val;
      best = params;
      record.best_epoch = epoch;
    }
  }
  return epochs > 0 ? best : params;
}

}  // namespace causal_gcn
