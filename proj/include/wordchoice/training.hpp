#pragma once

// Masked minibatch SGD shared by the bidirectional model and the
// unidirectional baselines.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/hyperparams.hpp"
#include "wordchoice/numkernel.hpp"

namespace wordchoice {

template <class Params>
Params zeros_like(const Params& p) {
  Params z = p;
  z.for_each_tensor([](const std::string&, nk::Matrix& m) { m.fill(0.0); });
  return z;
}

template <class Params>
std::vector<nk::TensorRef> tensor_refs(Params& p) {
  std::vector<nk::TensorRef> refs;
  p.for_each_tensor([&](const std::string& name, nk::Matrix& m) { refs.push_back({name, &m}); });
  return refs;
}

template <class Params>
std::vector<nk::ConstTensorRef> tensor_refs(const Params& p) {
  std::vector<nk::ConstTensorRef> refs;
  p.for_each_tensor([&](const std::string& name, const nk::Matrix& m) { refs.push_back({name, &m}); });
  return refs;
}

template <class Params>
void add_into(Params& dst, const Params& src) {
  auto d = tensor_refs(dst);
  auto s = tensor_refs(src);
  for (std::size_t t = 0; t < d.size(); ++t) {
    auto dv = d[t].value->values();
    auto sv = s[t].value->values();
    for (std::size_t k = 0; k < dv.size(); ++k) dv[k] += sv[k];
  }
}

struct EpochReport {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::size_t targets = 0;
  std::size_t batches = 0;
};

struct TrainLog {
  std::vector<EpochReport> epochs;

  double final_mean_loss() const { return epochs.empty() ? 0.0 : epochs.back().mean_loss; }
};

struct TrainOptions {
  std::size_t threads = 1;
  std::function<void(const EpochReport&)> on_epoch;
};

// Records one row's per-target loss nodes on a tape. Gradients flow into
// the supplied gradient set.
template <class Params>
using RowLossRecorder = std::function<std::vector<nk::Tape::Var>(
    nk::Tape&, const Params&, Params&, const corpus::EncodedSentence&, const std::vector<bool>&)>;

// Sum of row losses and gradients of (sum of losses) * weight over rows
// [begin, end).
template <class Params>
double accumulate_rows(const Params& params, Params& grads, const corpus::Batch& batch,
                       std::size_t begin, std::size_t end, double weight,
                       const RowLossRecorder<Params>& record) {
  double total = 0.0;
  for (std::size_t r = begin; r < end; ++r) {
    nk::Tape tape;
    auto losses = record(tape, params, grads, batch.rows[r], batch.mask[r]);
    if (losses.empty()) continue;
    auto sum = tape.weighted_sum(losses, weight);
    for (auto v : losses) total += tape.value(v)[0];
    tape.backward(sum);
  }
  return total;
}

// One pass of `epochs` over `sentences`: each batch contributes the mean
// loss over its mask-true positions. Rows are split into contiguous chunks
// across threads and chunk gradients are reduced in chunk order, so a
// fixed thread count gives bitwise-reproducible results.
template <class Params>
TrainLog train_masked(Params& params, std::span<const corpus::EncodedSentence> sentences,
                      const Hyperparams& hyper, const RowLossRecorder<Params>& record,
                      const TrainOptions& options = {}) {
  hyper.validate();
  TrainLog log;
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  std::vector<Params> chunk_grads(threads, zeros_like(params));
  auto param_refs = tensor_refs(params);
  auto grad_refs = tensor_refs(std::as_const(chunk_grads[0]));

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto batches = corpus::make_batches(sentences, hyper.batch_size, hyper.seed + epoch);
    EpochReport report{epoch, 0.0, 0, batches.size()};
    double epoch_loss = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const corpus::Batch& batch = batches[bi];
      const std::size_t targets = batch.target_count();
      if (targets == 0) continue;
      const double weight = 1.0 / static_cast<double>(targets);
      for (auto& g : chunk_grads) {
        g.for_each_tensor([](const std::string&, nk::Matrix& m) { m.fill(0.0); });
      }

      const std::size_t rows = batch.rows.size();
      const std::size_t used = std::min(threads, rows);
      std::vector<double> chunk_loss(used, 0.0);
      auto chunk_range = [&](std::size_t c) {
        return std::pair{rows * c / used, rows * (c + 1) / used};
      };
      if (used == 1) {
        chunk_loss[0] = accumulate_rows(params, chunk_grads[0], batch, 0, rows, weight, record);
      } else {
        std::vector<std::thread> workers;
        for (std::size_t c = 0; c < used; ++c) {
          workers.emplace_back([&, c] {
            auto [b, e] = chunk_range(c);
            chunk_loss[c] = accumulate_rows(params, chunk_grads[c], batch, b, e, weight, record);
          });
        }
        for (auto& w : workers) w.join();
        for (std::size_t c = 1; c < used; ++c) add_into(chunk_grads[0], chunk_grads[c]);
      }
      double batch_loss = 0.0;
      for (double l : chunk_loss) batch_loss += l;
      if (!std::isfinite(batch_loss)) {
        throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(bi));
      }
      try {
        nk::sgd_update(param_refs, grad_refs, hyper.lr, hyper.clip);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(bi));
      }
      epoch_loss += batch_loss;
      report.targets += targets;
    }
    report.mean_loss = report.targets == 0 ? 0.0 : epoch_loss / static_cast<double>(report.targets);
    log.epochs.push_back(report);
    if (options.on_epoch) options.on_epoch(report);
  }
  return log;
}

}  // namespace wordchoice
