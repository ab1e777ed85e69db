#include "psc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>

#include "psc/io.hpp"

namespace psc::dataset {

namespace {

// Derived-stream ids under BuildConfig.seed. Per-sample streams keep negative
// generation independent of iteration order.
constexpr std::uint64_t kStreamSelect = 1;
constexpr std::uint64_t kStreamSplitClass = 2;  // 2 and 3
constexpr std::uint64_t kStreamSplitOrder = 4;  // 4 and 5
constexpr std::uint64_t kStreamMutation = 16;   // 16 + sample ordinal

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

}  // namespace

void BuildConfig::validate() const {
  if (max_len < 1) raise(ErrorKind::BadConfig, "max_len must be at least 1");
  if (!(mutation_frac_lo > 0.0 && mutation_frac_lo <= mutation_frac_hi && mutation_frac_hi < 1.0))
    raise(ErrorKind::BadConfig, "mutation fractions must satisfy 0 < lo <= hi < 1");
  if (!(train_ratio > 0.0 && train_ratio < 1.0))
    raise(ErrorKind::BadConfig, "train_ratio must be in (0, 1)");
}

const std::array<std::pair<std::uint64_t, std::uint64_t>, LengthHistogram::kBuckets>&
LengthHistogram::bounds() {
  static const std::array<std::pair<std::uint64_t, std::uint64_t>, kBuckets> b = {{
      {1, 9},
      {10, 99},
      {100, 999},
      {1000, 1500},
      {1501, 9999},
      {10000, 99999},
      {100000, 1000000},
  }};
  return b;
}

void LengthHistogram::add(std::uint64_t length) {
  for (std::size_t i = 0; i < kBuckets; ++i) {
    const auto& [lo, hi] = bounds()[i];
    if (length >= lo && length <= hi) {
      ++counts[i];
      return;
    }
  }
  raise(ErrorKind::LengthOutOfRange, "sequence length " + std::to_string(length) +
                                         " outside histogram range [1, 1000000]");
}

std::uint64_t LengthHistogram::total() const {
  std::uint64_t n = 0;
  for (std::uint64_t c : counts) n += c;
  return n;
}

std::vector<ProteinSequence> augment_reverse(std::span<const ProteinSequence> seqs) {
  std::vector<ProteinSequence> out;
  out.reserve(seqs.size() * 2);
  for (const ProteinSequence& s : seqs) out.push_back(s);
  for (const ProteinSequence& s : seqs) out.push_back(reverse(s));
  return out;
}

std::vector<ProteinSequence> gen_homopolymer_negatives(const Vocabulary& vocab,
                                                       std::size_t max_len) {
  if (vocab.size() == 0) raise(ErrorKind::BadConfig, "empty vocabulary");
  std::vector<ProteinSequence> out;
  out.reserve(vocab.size());
  for (const MonomerCode& code : vocab.codes()) {
    std::vector<MonomerCode> tokens(max_len, code);
    out.emplace_back("fake~homo~" + code.str(), std::move(tokens));
  }
  return out;
}

ProteinSequence gen_mutation_negative(const ProteinSequence& src, const Vocabulary& vocab,
                                      const BuildConfig& cfg, Rng& rng) {
  if (vocab.size() == 0) raise(ErrorKind::BadConfig, "empty vocabulary");
  const std::size_t len = src.length();
  const double u = rng.uniform_real(cfg.mutation_frac_lo, cfg.mutation_frac_hi);
  std::size_t frag = std::max<std::size_t>(1, round_half_up(u * static_cast<double>(len)));
  frag = std::min(frag, len);
  const std::size_t start = static_cast<std::size_t>(rng.uniform_index(len - frag + 1));

  std::vector<MonomerCode> tokens = src.tokens;
  const std::int32_t v = static_cast<std::int32_t>(vocab.size());
  for (std::size_t i = start; i < start + frag; ++i)
    tokens[i] = vocab.code_at(1 + static_cast<std::int32_t>(rng.uniform_index(v)));
  return ProteinSequence(src.id + "~mut", std::move(tokens));
}

std::vector<LabeledSequence> build_balanced(std::span<const ProteinSequence> reals,
                                            const Vocabulary& vocab, const BuildConfig& cfg) {
  cfg.validate();
  if (vocab.size() == 0) raise(ErrorKind::BadConfig, "empty vocabulary");
  if (reals.size() < vocab.size())
    raise(ErrorKind::TooFewPositives,
          std::to_string(reals.size()) + " positives for " + std::to_string(vocab.size()) +
              " homopolymer negatives; need at least one positive per vocabulary code");

  std::vector<LabeledSequence> out;
  out.reserve(reals.size() * 2);
  for (const ProteinSequence& s : reals) out.push_back(LabeledSequence{s, 1});
  for (ProteinSequence& s : gen_homopolymer_negatives(vocab, cfg.max_len))
    out.push_back(LabeledSequence{std::move(s), 0});

  // Mutation sources: distinct positives, picked by a seeded shuffle.
  std::vector<std::size_t> order(reals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng select = Rng::derive(cfg.seed, kStreamSelect);
  select.shuffle(order);

  const std::size_t mutations = reals.size() - vocab.size();
  for (std::size_t k = 0; k < mutations; ++k) {
    Rng rng = Rng::derive(cfg.seed, kStreamMutation + k);
    out.push_back(LabeledSequence{gen_mutation_negative(reals[order[k]], vocab, cfg, rng), 0});
  }
  return out;
}

std::size_t LabeledDataset::count_label(std::int32_t label) const {
  std::size_t n = 0;
  for (const EncodedSample& s : samples)
    if (s.label == label) ++n;
  return n;
}

std::pair<LabeledDataset, LabeledDataset> split_and_encode(
    std::span<const LabeledSequence> labeled, const Vocabulary& vocab, const BuildConfig& cfg) {
  cfg.validate();

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const std::int32_t y = labeled[i].label;
    if (y != 0 && y != 1) raise(ErrorKind::BadConfig, "labels must be 0 or 1");
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < 2; ++c) {
    Rng rng = Rng::derive(cfg.seed, kStreamSplitClass + c);
    rng.shuffle(by_class[c]);
    const std::size_t n_train =
        round_half_up(cfg.train_ratio * static_cast<double>(by_class[c].size()));
    for (std::size_t k = 0; k < by_class[c].size(); ++k)
      (k < n_train ? train_idx : test_idx).push_back(by_class[c][k]);
  }

  auto make_split = [&](std::vector<std::size_t>& idx, std::uint64_t stream,
                        const char* tag) {
    Rng rng = Rng::derive(cfg.seed, stream);
    rng.shuffle(idx);
    LabeledDataset ds;
    ds.vocab = vocab;
    ds.split_tag = tag;
    ds.max_len = cfg.max_len;
    ds.samples.reserve(idx.size());
    ds.ids.reserve(idx.size());
    for (std::size_t i : idx) {
      const LabeledSequence& ls = labeled[i];
      ds.samples.push_back(EncodedSample{encode(ls.seq, vocab, cfg.max_len), ls.label});
      ds.ids.push_back(ls.seq.id);
    }
    return ds;
  };
  return {make_split(train_idx, kStreamSplitOrder, "train"),
          make_split(test_idx, kStreamSplitOrder + 1, "test")};
}

void write_dataset(const std::filesystem::path& path, const LabeledDataset& ds) {
  io::FileSink sink(path, io::has_suffix(path.string(), ".gz"));
  sink.write("id,label,indices\n");
  std::string row;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const EncodedSample& s = ds.samples[i];
    row.clear();
    row += i < ds.ids.size() ? ds.ids[i] : std::string();
    row += ',';
    row += std::to_string(s.label);
    row += ',';
    for (std::size_t j = 0; j < s.indices.size(); ++j) {
      if (j != 0) row += ' ';
      row += std::to_string(s.indices[j]);
    }
    row += '\n';
    sink.write(row);
  }
  sink.close();
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  io::FileSource file(path);
  std::unique_ptr<io::GzipSource> gz;
  io::ByteSource* src = &file;
  if (io::has_suffix(path.string(), ".gz")) {
    gz = std::make_unique<io::GzipSource>(file);
    src = gz.get();
  }
  io::LineReader lines(*src);

  std::string line;
  if (!lines.next(line) || (line != "id,label,indices" && line != "id,label,indices\r"))
    raise(ErrorKind::BadTableFormat, path.string() + ": missing \"id,label,indices\" header");

  LabeledDataset ds;
  std::size_t lineno = 1;
  while (lines.next(line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto bad = [&](const std::string& what) {
      raise(ErrorKind::BadTableFormat, path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) bad("expected id,label,indices");

    EncodedSample sample;
    const std::string label = line.substr(c1 + 1, c2 - c1 - 1);
    if (label == "0")
      sample.label = 0;
    else if (label == "1")
      sample.label = 1;
    else
      bad("label must be 0 or 1, got \"" + label + "\"");

    const char* p = line.c_str() + c2 + 1;
    while (*p != '\0') {
      char* end = nullptr;
      const long v = std::strtol(p, &end, 10);
      if (end == p || v < 0) bad("bad token index");
      sample.indices.push_back(static_cast<std::int32_t>(v));
      p = end;
      while (*p == ' ') ++p;
    }
    if (sample.indices.empty()) bad("empty index list");
    if (ds.max_len == 0)
      ds.max_len = sample.indices.size();
    else if (sample.indices.size() != ds.max_len)
      bad("inconsistent sample length");

    ds.ids.push_back(line.substr(0, c1));
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace psc::dataset
