#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psc/errors.hpp"

namespace psc {

/// Index reserved for right padding; never assigned to a code.
inline constexpr std::int32_t kPadIndex = 0;

/// Suffix appended to the id of a reversed sequence.
inline constexpr std::string_view kReverseMarker = "~rev";

/// Short uppercase monomer identifier, e.g. a three-letter residue code.
/// Codes are opaque text: non-empty, characters A-Z and 0-9 only.
class MonomerCode {
 public:
  explicit MonomerCode(std::string text);

  const std::string& str() const noexcept { return text_; }

  auto operator<=>(const MonomerCode&) const = default;

 private:
  std::string text_;
};

/// An identified, ordered monomer sequence from one polymer entity.
struct ProteinSequence {
  ProteinSequence(std::string id, std::vector<MonomerCode> tokens);

  std::size_t length() const noexcept { return tokens.size(); }

  std::string id;
  std::vector<MonomerCode> tokens;
};

/// Bijective code -> index mapping with indices exactly 1..V; 0 is padding.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Indices assigned 1..V in lexicographic code order.
  static Vocabulary over_codes(const std::set<std::string>& codes);

  /// Codes already in index order: codes[i] receives index i+1.
  static Vocabulary from_ordered(const std::vector<std::string>& codes);

  std::size_t size() const noexcept { return codes_.size(); }

  std::optional<std::int32_t> find(const MonomerCode& code) const;

  /// Throws UnknownToken naming the offending code.
  std::int32_t index_of(const MonomerCode& code) const;

  /// Code for index in 1..V; throws IndexOutOfVocab otherwise.
  const MonomerCode& code_at(std::int32_t index) const;

  /// Codes in index order (codes()[i] has index i+1).
  const std::vector<MonomerCode>& codes() const noexcept { return codes_; }

  // Serialization: one "CODE<TAB>INDEX" line per entry, sorted by index.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.codes_ == b.codes_; }

 private:
  std::vector<MonomerCode> codes_;
  std::map<std::string, std::int32_t> index_;
};

/// Fixed-length encoded input: token indices right-padded with 0.
struct EncodedSample {
  std::vector<std::int32_t> indices;
  std::int32_t label = 0;  // 0 = fake, 1 = real
};

/// Vocabulary over the distinct codes observed in the corpus.
Vocabulary build_vocabulary(std::span<const ProteinSequence> corpus);

/// Encode to exactly max_len indices with right padding.
/// Throws SequenceTooLong or UnknownToken.
std::vector<std::int32_t> encode(const ProteinSequence& seq, const Vocabulary& vocab,
                                 std::size_t max_len);

/// Tokens in reverse order; id gains the reversal marker.
ProteinSequence reverse(const ProteinSequence& seq);

}  // namespace psc
