#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "psc/dataset.hpp"
#include "psc/io.hpp"
#include "support/checks.hpp"
#include "support/tempdir.hpp"
#include "support/toy.hpp"

using namespace psc::dataset;
using psc::ErrorKind;
using psc::MonomerCode;
using psc::ProteinSequence;
using psc::Rng;
using psc::Vocabulary;
using testsupport::TempDir;
using testsupport::thrown_kind;

namespace {

/// Length-only stand-in so corpus-scale histogram tests need no real tokens.
struct FakeLen {
  std::size_t n;
  std::size_t length() const { return n; }
};

ProteinSequence repeat_seq(const std::string& id, const char* code, std::size_t n) {
  return ProteinSequence(id, std::vector<MonomerCode>(n, MonomerCode(code)));
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("build config validation") {
  BuildConfig ok;
  ok.validate();

  BuildConfig bad = ok;
  bad.max_len = 0;
  CHECK(thrown_kind([&] { bad.validate(); }) == ErrorKind::BadConfig);
  bad = ok;
  bad.mutation_frac_lo = 0.0;
  CHECK(thrown_kind([&] { bad.validate(); }) == ErrorKind::BadConfig);
  bad = ok;
  bad.mutation_frac_lo = 0.08;  // lo > hi
  CHECK(thrown_kind([&] { bad.validate(); }) == ErrorKind::BadConfig);
  bad = ok;
  bad.mutation_frac_hi = 1.0;
  CHECK(thrown_kind([&] { bad.validate(); }) == ErrorKind::BadConfig);
  bad = ok;
  bad.train_ratio = 1.0;
  CHECK(thrown_kind([&] { bad.validate(); }) == ErrorKind::BadConfig);
  bad = ok;
  bad.train_ratio = 0.0;
  CHECK(thrown_kind([&] { bad.validate(); }) == ErrorKind::BadConfig);
}

TEST_CASE("length histogram buckets") {
  const auto& b = LengthHistogram::bounds();
  CHECK(b[0] == std::pair<std::uint64_t, std::uint64_t>{1, 9});
  CHECK(b[3] == std::pair<std::uint64_t, std::uint64_t>{1000, 1500});
  CHECK(b[4] == std::pair<std::uint64_t, std::uint64_t>{1501, 9999});
  CHECK(b[6] == std::pair<std::uint64_t, std::uint64_t>{100000, 1000000});

  std::vector<FakeLen> lens = {{5}, {50}, {500}};
  auto h = length_histogram(lens);
  CHECK(h.counts == std::array<std::uint64_t, 7>{1, 1, 1, 0, 0, 0, 0});
  CHECK(h.total() == 3);

  LengthHistogram edges;
  for (std::uint64_t n : {1ull, 9ull, 10ull, 999ull, 1000ull, 1500ull, 1501ull, 1000000ull})
    edges.add(n);
  CHECK(edges.counts == std::array<std::uint64_t, 7>{2, 1, 1, 2, 1, 0, 1});

  CHECK(thrown_kind([&] { edges.add(0); }) == ErrorKind::LengthOutOfRange);
  CHECK(thrown_kind([&] { edges.add(1000001); }) == ErrorKind::LengthOutOfRange);

  CHECK(length_histogram(std::vector<FakeLen>{}).total() == 0);
}

TEST_CASE("corpus-scale histogram and length filter reproduce the published counts") {
  const std::array<std::uint64_t, 7> published = {96, 3149, 83526, 9107, 9117, 127, 1};
  std::vector<FakeLen> corpus;
  for (std::size_t bucket = 0; bucket < published.size(); ++bucket) {
    const auto [lo, hi] = LengthHistogram::bounds()[bucket];
    for (std::uint64_t i = 0; i < published[bucket]; ++i)
      corpus.push_back(FakeLen{static_cast<std::size_t>(lo + i % (hi - lo + 1))});
  }

  auto h = length_histogram(corpus);
  CHECK(h.counts == published);
  CHECK(h.total() == 105123);

  auto kept = filter_by_length(corpus, 1500);
  CHECK(kept.size() == 95878);
  const double ratio = static_cast<double>(kept.size()) / static_cast<double>(corpus.size());
  CHECK(ratio * 100.0 == doctest::Approx(91.206).epsilon(1e-5));
  for (const auto& f : kept) CHECK(f.length() <= 1500);
}

TEST_CASE("the length filter keeps the boundary and preserves order") {
  std::vector<FakeLen> lens = {{1500}, {1501}, {3}, {1500}};
  auto kept = filter_by_length(lens, 1500);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].n == 1500);
  CHECK(kept[1].n == 3);
  CHECK(kept[2].n == 1500);
  CHECK(filter_by_length(std::vector<FakeLen>{{2000}, {1700}}, 1500).empty());
}

TEST_CASE("reversal augmentation doubles the corpus, originals first") {
  auto reals = testsupport::toy_corpus(3, 11, 4, 8);
  auto aug = augment_reverse(reals);
  REQUIRE(aug.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(aug[i].id == reals[i].id);
    CHECK(aug[i].tokens == reals[i].tokens);
    CHECK(aug[3 + i].id == reals[i].id + std::string(psc::kReverseMarker));
    CHECK(aug[3 + i].length() == reals[i].length());
    CHECK(aug[3 + i].tokens == psc::reverse(reals[i]).tokens);
  }

  std::vector<ProteinSequence> pal = {repeat_seq("pal", "ALA", 5)};
  auto aug_pal = augment_reverse(pal);
  REQUIRE(aug_pal.size() == 2);
  CHECK(aug_pal[0].tokens == aug_pal[1].tokens);
  CHECK(aug_pal[0].id != aug_pal[1].id);
}

TEST_CASE("homopolymer negatives cover the vocabulary exactly once") {
  std::set<std::string> twenty_three;
  for (char a = 'A'; a < 'A' + 23; ++a) twenty_three.insert(std::string(1, a) + "XX");
  auto vocab = Vocabulary::over_codes(twenty_three);
  REQUIRE(vocab.size() == 23);

  auto fakes = gen_homopolymer_negatives(vocab, 1500);
  REQUIRE(fakes.size() == 23);
  std::set<std::string> seen;
  for (const auto& f : fakes) {
    CHECK(f.length() == 1500);
    std::set<std::string> distinct;
    for (const auto& t : f.tokens) distinct.insert(t.str());
    CHECK(distinct.size() == 1);
    CHECK(f.id == "fake~homo~" + *distinct.begin());
    seen.insert(*distinct.begin());
  }
  CHECK(seen.size() == 23);

  auto single = gen_homopolymer_negatives(Vocabulary::over_codes({"GLY"}), 7);
  REQUIRE(single.size() == 1);
  CHECK(single[0].length() == 7);
}

TEST_CASE("mutation negatives replace one bounded contiguous fragment") {
  // The source code is deliberately absent from the vocabulary, so every
  // replaced position provably changes and the fragment is observable.
  auto vocab = Vocabulary::over_codes({"ALA", "GLY", "SER", "THR"});
  BuildConfig cfg;

  auto fragment_of = [&](std::size_t len, std::uint64_t stream) {
    auto src = repeat_seq("src", "ZZZ", len);
    Rng rng = Rng::derive(cfg.seed, stream);
    auto mut = gen_mutation_negative(src, vocab, cfg, rng);
    REQUIRE(mut.length() == len);
    REQUIRE(mut.id == "src~mut");
    std::size_t first = len, last = 0, changed = 0;
    for (std::size_t i = 0; i < len; ++i) {
      if (mut.tokens[i] != src.tokens[i]) {
        first = std::min(first, i);
        last = std::max(last, i);
        ++changed;
        CHECK(vocab.find(mut.tokens[i]).has_value());
      }
    }
    REQUIRE(changed > 0);
    CHECK(changed == last - first + 1);  // contiguous
    return changed;
  };

  std::set<std::size_t> frags100;
  for (std::uint64_t s = 0; s < 10000; ++s) frags100.insert(fragment_of(100, s));
  CHECK(frags100 == std::set<std::size_t>{5, 6, 7});

  for (std::uint64_t s = 0; s < 200; ++s) CHECK(fragment_of(10, s) == 1);
  CHECK(fragment_of(1, 0) == 1);

  for (std::uint64_t s = 0; s < 500; ++s) {
    const std::size_t frag = fragment_of(137, s);
    CHECK(frag >= 7);   // round(0.05 * 137)
    CHECK(frag <= 10);  // round(0.07 * 137)
  }
}

TEST_CASE("mutation generation is deterministic per rng stream") {
  auto vocab = Vocabulary::over_codes({"ALA", "GLY"});
  BuildConfig cfg;
  auto src = repeat_seq("s", "TRP", 60);
  Rng a = Rng::derive(42, 16);
  Rng b = Rng::derive(42, 16);
  Rng c = Rng::derive(43, 16);
  auto m1 = gen_mutation_negative(src, vocab, cfg, a);
  auto m2 = gen_mutation_negative(src, vocab, cfg, b);
  auto m3 = gen_mutation_negative(src, vocab, cfg, c);
  CHECK(m1.tokens == m2.tokens);
  CHECK(m1.tokens != m3.tokens);  // overwhelmingly likely for a 3+ token fragment
}

TEST_CASE("balanced set pairs every positive with one negative") {
  auto reals = testsupport::toy_corpus(30, 5, 20, 40);
  auto vocab = psc::build_vocabulary(reals);
  REQUIRE(vocab.size() == 6);
  BuildConfig cfg;
  cfg.max_len = 40;
  cfg.seed = 5;

  auto all = build_balanced(reals, vocab, cfg);
  REQUIRE(all.size() == 60);

  std::size_t positives = 0, homos = 0, muts = 0;
  std::set<std::string> mut_ids;
  for (const auto& ls : all) {
    if (ls.label == 1) {
      ++positives;
    } else if (ls.seq.id.rfind("fake~homo~", 0) == 0) {
      ++homos;
      CHECK(ls.seq.length() == cfg.max_len);
    } else {
      ++muts;
      CHECK(ls.seq.id.size() > 4);
      CHECK(ls.seq.id.substr(ls.seq.id.size() - 4) == "~mut");
      mut_ids.insert(ls.seq.id);
    }
    for (const auto& t : ls.seq.tokens) CHECK(vocab.find(t).has_value());
  }
  CHECK(positives == 30);
  CHECK(homos == vocab.size());
  CHECK(muts == 30 - vocab.size());
  CHECK(mut_ids.size() == muts);  // distinct sources

  // order: positives first, in input order
  for (std::size_t i = 0; i < reals.size(); ++i) {
    CHECK(all[i].label == 1);
    CHECK(all[i].seq.id == reals[i].id);
  }

  auto again = build_balanced(reals, vocab, cfg);
  REQUIRE(again.size() == all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(again[i].seq.id == all[i].seq.id);
    CHECK(again[i].seq.tokens == all[i].seq.tokens);
  }

  BuildConfig other = cfg;
  other.seed = 6;
  auto different = build_balanced(reals, vocab, other);
  bool any_diff = false;
  for (std::size_t i = 0; i < all.size(); ++i)
    any_diff = any_diff || different[i].seq.tokens != all[i].seq.tokens ||
               different[i].seq.id != all[i].seq.id;
  CHECK(any_diff);
}

TEST_CASE("balancing needs at least one positive per vocabulary code") {
  auto reals = testsupport::toy_corpus(5, 1, 30, 30);
  auto vocab = psc::build_vocabulary(reals);
  REQUIRE(vocab.size() == 6);
  BuildConfig cfg;
  cfg.max_len = 30;
  CHECK(thrown_kind([&] { build_balanced(reals, vocab, cfg); }) == ErrorKind::TooFewPositives);
}

TEST_CASE("stratified split with the round-half-up rule") {
  auto reals = testsupport::toy_corpus(30, 5, 20, 40);
  auto vocab = psc::build_vocabulary(reals);
  BuildConfig cfg;
  cfg.max_len = 40;
  cfg.seed = 9;
  auto all = build_balanced(reals, vocab, cfg);

  auto [train, test] = split_and_encode(all, vocab, cfg);
  CHECK(train.split_tag == "train");
  CHECK(test.split_tag == "test");
  CHECK(train.max_len == 40);
  CHECK(train.vocab == vocab);
  CHECK(train.samples.size() == 48);  // 24 per class
  CHECK(test.samples.size() == 12);
  CHECK(train.count_label(1) == 24);
  CHECK(train.count_label(0) == 24);
  CHECK(test.count_label(1) == 6);
  CHECK(test.count_label(0) == 6);
  CHECK(train.samples.size() == train.ids.size());

  for (const auto& s : train.samples) CHECK(s.indices.size() == cfg.max_len);
  for (const auto& s : test.samples) CHECK(s.indices.size() == cfg.max_len);

  std::set<std::string> train_ids(train.ids.begin(), train.ids.end());
  std::set<std::string> test_ids(test.ids.begin(), test.ids.end());
  CHECK(train_ids.size() == train.ids.size());
  CHECK(test_ids.size() == test.ids.size());
  for (const auto& id : test_ids) CHECK(train_ids.count(id) == 0);
  CHECK(train_ids.size() + test_ids.size() == all.size());

  auto [train2, test2] = split_and_encode(all, vocab, cfg);
  CHECK(train2.ids == train.ids);
  CHECK(test2.ids == test.ids);
}

TEST_CASE("split arithmetic on small counts") {
  auto reals = testsupport::toy_corpus(10, 2, 15, 15);
  auto vocab = psc::build_vocabulary(reals);
  std::vector<LabeledSequence> positives_only;
  for (const auto& s : reals) positives_only.push_back(LabeledSequence{s, 1});

  BuildConfig cfg;
  cfg.max_len = 15;
  auto [train, test] = split_and_encode(positives_only, vocab, cfg);
  CHECK(train.samples.size() == 8);
  CHECK(test.samples.size() == 2);

  cfg.train_ratio = 0.5;  // 10 * 0.5 with half-up rounding
  auto [t5, v5] = split_and_encode(positives_only, vocab, cfg);
  CHECK(t5.samples.size() == 5);
  CHECK(v5.samples.size() == 5);

  std::vector<LabeledSequence> five(positives_only.begin(), positives_only.begin() + 5);
  auto [t3, v2] = split_and_encode(five, vocab, cfg);
  CHECK(t3.samples.size() == 3);  // round(2.5) -> 3
  CHECK(v2.samples.size() == 2);
}

TEST_CASE("dataset files round-trip exactly") {
  auto reals = testsupport::toy_corpus(12, 3, 10, 25);
  auto vocab = psc::build_vocabulary(reals);
  BuildConfig cfg;
  cfg.max_len = 25;
  auto all = build_balanced(reals, vocab, cfg);
  auto [train, test] = split_and_encode(all, vocab, cfg);

  TempDir tmp;
  for (const char* name : {"round.csv.gz", "round.csv"}) {
    const auto path = tmp.file(name);
    write_dataset(path, train);
    auto got = read_dataset(path);
    CHECK(got.ids == train.ids);
    CHECK(got.max_len == train.max_len);
    REQUIRE(got.samples.size() == train.samples.size());
    for (std::size_t i = 0; i < got.samples.size(); ++i) {
      CHECK(got.samples[i].label == train.samples[i].label);
      CHECK(got.samples[i].indices == train.samples[i].indices);
    }
  }
}

TEST_CASE("dataset files with the wrong shape are rejected") {
  TempDir tmp;
  auto kind_of = [&](const std::string& content) {
    const auto p = tmp.write("bad.csv", content);
    return thrown_kind([&] { read_dataset(p); });
  };
  CHECK(kind_of("id,tokens\na,1,1 2\n") == ErrorKind::BadTableFormat);       // wrong header
  CHECK(kind_of("id,label,indices\na,2,1 2\n") == ErrorKind::BadTableFormat);  // bad label
  CHECK(kind_of("id,label,indices\na,1,1 x\n") == ErrorKind::BadTableFormat);  // bad index
  CHECK(kind_of("id,label,indices\na,1,1 2\nb,0,1 2 3\n") ==
        ErrorKind::BadTableFormat);  // ragged rows
  CHECK(kind_of("id,label,indices\na,1\n") == ErrorKind::BadTableFormat);      // missing field
}

}  // TEST_SUITE
