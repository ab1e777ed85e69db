#pragma once

#include <cstdint>
#include <filesystem>

#include "psc/nn.hpp"
#include "psc/seq.hpp"

namespace psc::checkpoint {

/// Everything needed to resume or serve a trained model.
struct Checkpoint {
  nn::ModelConfig config;
  Vocabulary vocab;
  std::int64_t epoch = 0;  // 1-based epoch that produced these weights
  double val_acc = 0.0;
  nn::Parameters params;
  nn::AdadeltaState opt;
};

/// Binary container: magic "PSC1", little-endian u64 header length, JSON
/// header (config, vocabulary, epoch, val_acc, optimizer hyperparameters),
/// then parameter tensors followed by both optimizer accumulator sets as
/// little-endian 64-bit reals in declaration order. Writes are atomic.
void save(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws BadCheckpoint on any structural problem (bad magic, short file,
/// trailing bytes, header/tensor disagreement).
Checkpoint load(const std::filesystem::path& path);

}  // namespace psc::checkpoint
