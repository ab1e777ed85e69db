#include "psc/seq.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace psc {

namespace {

bool valid_code_char(char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }

}  // namespace

MonomerCode::MonomerCode(std::string text) : text_(std::move(text)) {
  if (text_.empty()) raise(ErrorKind::InvalidMonomerCode, "empty monomer code");
  for (char c : text_) {
    if (!valid_code_char(c))
      raise(ErrorKind::InvalidMonomerCode, "invalid character in monomer code '" + text_ + "'");
  }
}

ProteinSequence::ProteinSequence(std::string id_, std::vector<MonomerCode> tokens_)
    : id(std::move(id_)), tokens(std::move(tokens_)) {
  if (tokens.empty()) raise(ErrorKind::InputTooShort, "protein sequence '" + id + "' has no tokens");
}

Vocabulary Vocabulary::over_codes(const std::set<std::string>& codes) {
  Vocabulary v;
  v.codes_.reserve(codes.size());
  std::int32_t next = 1;  // std::set iterates in lexicographic order
  for (const auto& c : codes) {
    v.codes_.emplace_back(MonomerCode(c));
    v.index_.emplace(c, next++);
  }
  return v;
}

Vocabulary Vocabulary::from_ordered(const std::vector<std::string>& codes) {
  Vocabulary v;
  v.codes_.reserve(codes.size());
  std::int32_t next = 1;
  for (const auto& c : codes) {
    v.codes_.emplace_back(MonomerCode(c));
    if (!v.index_.emplace(c, next++).second)
      raise(ErrorKind::BadConfig, "duplicate vocabulary code '" + c + "'");
  }
  return v;
}

std::optional<std::int32_t> Vocabulary::find(const MonomerCode& code) const {
  auto it = index_.find(code.str());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocabulary::index_of(const MonomerCode& code) const {
  auto idx = find(code);
  if (!idx) raise(ErrorKind::UnknownToken, "token '" + code.str() + "' not in vocabulary");
  return *idx;
}

const MonomerCode& Vocabulary::code_at(std::int32_t index) const {
  if (index < 1 || static_cast<std::size_t>(index) > codes_.size())
    raise(ErrorKind::IndexOutOfVocab, "index " + std::to_string(index) + " outside 1.." +
                                          std::to_string(codes_.size()));
  return codes_[static_cast<std::size_t>(index) - 1];
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < codes_.size(); ++i)
    out << codes_[i].str() << '\t' << (i + 1) << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  Vocabulary v;
  std::string line;
  std::int64_t expected = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      raise(ErrorKind::InputUnreadable, "vocabulary line without tab: '" + line + "'");
    std::string code = line.substr(0, tab);
    std::int64_t index = 0;
    try {
      index = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      raise(ErrorKind::InputUnreadable, "bad vocabulary index in line '" + line + "'");
    }
    if (index != expected)
      raise(ErrorKind::InputUnreadable, "vocabulary indices must be 1..V without gaps, got " +
                                            std::to_string(index));
    v.codes_.emplace_back(MonomerCode(code));
    if (!v.index_.emplace(code, static_cast<std::int32_t>(index)).second)
      raise(ErrorKind::InputUnreadable, "duplicate vocabulary code '" + code + "'");
    ++expected;
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::OutputUnwritable, "cannot open '" + path.string() + "' for writing");
  write(out);
  if (!out) raise(ErrorKind::OutputUnwritable, "failed writing '" + path.string() + "'");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::InputUnreadable, "cannot open '" + path.string() + "'");
  return read(in);
}

Vocabulary build_vocabulary(std::span<const ProteinSequence> corpus) {
  std::set<std::string> codes;
  for (const auto& seq : corpus)
    for (const auto& tok : seq.tokens) codes.insert(tok.str());
  return Vocabulary::over_codes(codes);
}

std::vector<std::int32_t> encode(const ProteinSequence& seq, const Vocabulary& vocab,
                                 std::size_t max_len) {
  if (seq.length() > max_len)
    raise(ErrorKind::SequenceTooLong, "sequence '" + seq.id + "' has length " +
                                          std::to_string(seq.length()) + " > " +
                                          std::to_string(max_len));
  std::vector<std::int32_t> out(max_len, kPadIndex);
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) out[i] = vocab.index_of(seq.tokens[i]);
  return out;
}

ProteinSequence reverse(const ProteinSequence& seq) {
  std::vector<MonomerCode> rev(seq.tokens.rbegin(), seq.tokens.rend());
  return ProteinSequence(seq.id + std::string(kReverseMarker), std::move(rev));
}

}  // namespace psc
