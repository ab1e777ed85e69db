#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psc/seq.hpp"

namespace testsupport {

/// Codes used by the synthetic corpus, cyclically ordered.
const std::vector<std::string>& toy_codes();

/// One synthetic chain: a random start state followed by steps of +1 or +2
/// around the code cycle. Forward chains and their reversals are exactly the
/// walks whose adjacent steps stay in {+1,+2,-1,-2} mod V, so homopolymer and
/// fragment-mutation negatives almost surely contain a forbidden transition.
psc::ProteinSequence toy_chain(std::uint64_t seed, std::uint64_t index,
                               std::size_t len_lo, std::size_t len_hi);

/// A batch of chains with ids toy000000, toy000001, ...
std::vector<psc::ProteinSequence> toy_corpus(std::size_t count,
                                             std::uint64_t seed,
                                             std::size_t len_lo,
                                             std::size_t len_hi);

}  // namespace testsupport
