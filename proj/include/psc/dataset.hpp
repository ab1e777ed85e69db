#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iterator>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "psc/rng.hpp"
#include "psc/seq.hpp"

namespace psc::dataset {

struct BuildConfig {
  std::size_t max_len = 1500;
  double mutation_frac_lo = 0.05;
  double mutation_frac_hi = 0.07;
  double train_ratio = 0.8;
  std::uint64_t seed = 0;

  /// Throws BadConfig when a field is out of range.
  void validate() const;
};

/// Sequence-length counts over fixed decade-style buckets; the fourth bucket
/// splits at the padding length 1500 so retention under the length filter is
/// readable directly from the histogram.
struct LengthHistogram {
  static constexpr std::size_t kBuckets = 7;

  /// Inclusive [lo, hi] bucket bounds.
  static const std::array<std::pair<std::uint64_t, std::uint64_t>, kBuckets>& bounds();

  /// Throws LengthOutOfRange for lengths beyond the last bucket.
  void add(std::uint64_t length);

  std::uint64_t total() const;

  std::array<std::uint64_t, kBuckets> counts{};

  friend bool operator==(const LengthHistogram&, const LengthHistogram&) = default;
};

template <class Range>
LengthHistogram length_histogram(const Range& seqs) {
  LengthHistogram h;
  for (const auto& s : seqs) h.add(s.length());
  return h;
}

/// Keeps sequences with length <= max_len, preserving order.
template <class Range>
auto filter_by_length(const Range& seqs, std::size_t max_len) {
  std::vector<std::decay_t<decltype(*std::begin(seqs))>> out;
  for (const auto& s : seqs)
    if (s.length() <= max_len) out.push_back(s);
  return out;
}

/// Originals followed by their reversals; exactly doubles the count.
std::vector<ProteinSequence> augment_reverse(std::span<const ProteinSequence> seqs);

/// One all-same-code sequence of length max_len per vocabulary entry.
std::vector<ProteinSequence> gen_homopolymer_negatives(const Vocabulary& vocab,
                                                       std::size_t max_len);

/// Copy of src with one contiguous fragment (5-7% of the length, floor 1)
/// replaced by uniformly drawn codes. Length is preserved.
ProteinSequence gen_mutation_negative(const ProteinSequence& src, const Vocabulary& vocab,
                                      const BuildConfig& cfg, Rng& rng);

struct LabeledSequence {
  ProteinSequence seq;
  std::int32_t label;  // 1 = real, 0 = fake
};

/// All positives plus an equal number of negatives: V homopolymers and
/// |reals| - V mutation negatives built from distinct shuffle-selected
/// positives. Throws TooFewPositives when |reals| < V.
std::vector<LabeledSequence> build_balanced(std::span<const ProteinSequence> reals,
                                            const Vocabulary& vocab, const BuildConfig& cfg);

/// Fixed-length encoded split; samples[i] corresponds to ids[i].
struct LabeledDataset {
  std::vector<EncodedSample> samples;
  std::vector<std::string> ids;
  Vocabulary vocab;
  std::string split_tag;  // "train" or "test"
  std::size_t max_len = 0;

  std::size_t count_label(std::int32_t label) const;
};

/// Stratified seeded split: per class, round(train_ratio * n) samples go to
/// train; each split is then shuffled and encoded to max_len.
std::pair<LabeledDataset, LabeledDataset> split_and_encode(
    std::span<const LabeledSequence> labeled, const Vocabulary& vocab, const BuildConfig& cfg);

/// Dataset file: gzip CSV (plain when the path lacks ".gz"), header
/// "id,label,indices", indices space-separated. Reading fills samples, ids
/// and max_len; vocabulary and split tag are attached by the caller.
void write_dataset(const std::filesystem::path& path, const LabeledDataset& ds);
LabeledDataset read_dataset(const std::filesystem::path& path);

}  // namespace psc::dataset
