#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "psc/checkpoint.hpp"
#include "psc/dataset.hpp"
#include "psc/nn.hpp"

namespace psc::train {

struct TrainConfig {
  std::int32_t batch_size = 50;
  std::int32_t epochs = 50;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_path;  // empty: keep the best model in memory only
  double threshold = 0.5;                 // p >= threshold predicts the positive class
  std::size_t jobs = 1;                   // 0 = hardware concurrency
  double rho = 0.95;
  double lr = 1.0;
  double epsilon = 1e-6;

  void validate() const;
};

struct EpochRecord {
  std::int64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
  }
};

struct EvalResult {
  double loss = 0.0;      // mean BCE over the dataset
  double accuracy = 0.0;  // equals confusion.accuracy()
  ConfusionMatrix confusion;

  /// Confusion counts by unpadded sample length, over the standard histogram
  /// buckets; lets the padding effect on long-vs-short inputs be examined.
  struct BucketStat {
    std::uint64_t lo = 0, hi = 0;
    ConfusionMatrix confusion;
  };
  std::array<BucketStat, dataset::LengthHistogram::kBuckets> by_length{};
};

struct TrainingHistory {
  std::vector<EpochRecord> records;
  std::int64_t best_epoch = 0;  // 0 when no epoch has been completed
  double best_val_acc = 0.0;
};

struct TrainOutcome {
  TrainingHistory history;
  checkpoint::Checkpoint best;  // highest val_acc, earliest epoch on ties
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Full training run: seeded initialization, per-epoch derived shuffles,
/// mini-batches with mean-gradient Adadelta steps (final short batch
/// included), post-epoch evaluation of both splits, and a checkpoint write
/// whenever validation accuracy strictly improves. Identical configs and
/// seeds reproduce the history bit for bit, regardless of jobs.
TrainOutcome train(const nn::ModelConfig& model_cfg, const dataset::LabeledDataset& train_set,
                   const dataset::LabeledDataset& val_set, const TrainConfig& cfg,
                   const EpochObserver& observer = {});

/// Forward-only metrics; identical results for any jobs value.
/// Throws NonFiniteLoss when the mean loss is not finite.
EvalResult evaluate(const nn::ModelConfig& model_cfg, const nn::Parameters& params,
                    const dataset::LabeledDataset& ds, double threshold = 0.5,
                    std::size_t jobs = 1);

/// Checkpoint convenience; rejects a dataset whose attached vocabulary
/// disagrees with the checkpoint's.
EvalResult evaluate(const checkpoint::Checkpoint& ckpt, const dataset::LabeledDataset& ds,
                    double threshold = 0.5, std::size_t jobs = 1);

/// CSV ("epoch,train_loss,train_acc,val_loss,val_acc", full-precision
/// values) plus a two-panel SVG line chart of the same series.
void export_history(const TrainingHistory& history, const std::filesystem::path& csv_path,
                    const std::filesystem::path& svg_path);

/// Parses a CSV written by export_history; round-trips exactly.
std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path);

struct Prediction {
  double probability = 0.0;
  std::int32_t label = 0;
};

/// Encodes with the checkpoint's vocabulary and runs one forward pass.
Prediction predict(const checkpoint::Checkpoint& ckpt, const ProteinSequence& seq,
                   double threshold = 0.5);

}  // namespace psc::train
