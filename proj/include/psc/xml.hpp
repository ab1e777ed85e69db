#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "psc/io.hpp"

namespace psc::xml {

struct Attribute {
  std::string name;   // qualified, as written
  std::string value;  // entity-decoded
};

/// Local part of a qualified name (text after the last ':').
std::string_view local_name(std::string_view qualified) noexcept;

/// Minimal streaming pull parser: elements, attributes, character data,
/// comments, CDATA, processing instructions and the predefined entities.
/// Memory use is bounded by the read chunk plus the open-element stack; large
/// documents are never buffered whole. Throws MalformedXml with the byte
/// offset of the offending construct.
class PullParser {
 public:
  enum class Event { StartElement, EndElement, Text, EndOfDocument };

  explicit PullParser(io::ByteSource& src);

  Event next();

  /// Qualified element name (Start/EndElement events).
  const std::string& name() const noexcept { return name_; }
  /// Attributes of the last StartElement.
  const std::vector<Attribute>& attributes() const noexcept { return attrs_; }
  /// Finds an attribute by local name; nullptr when absent.
  const Attribute* find_attribute(std::string_view local) const noexcept;
  /// Character data of the last Text event.
  const std::string& text() const noexcept { return text_; }
  /// Nesting depth (number of open elements).
  std::size_t depth() const noexcept { return stack_.size(); }
  /// Byte offset of the next unread input byte.
  std::uint64_t offset() const noexcept { return offset_ - (buf_.size() - pos_); }

 private:
  [[noreturn]] void fail(const std::string& what) const;
  bool fill();
  int peek();
  int get();
  void expect(char c, const char* context);
  void skip_whitespace();
  std::string read_name(const char* context);
  void read_attr_value(std::string& out);
  void decode_entity(std::string& out);
  bool read_markup_prolog();  // handles <? <!-- <!DOCTYPE <![CDATA[ ; true if consumed
  void parse_start_tag();
  void parse_end_tag();

  io::ByteSource& src_;
  std::string buf_;
  std::size_t pos_ = 0;
  bool eof_ = false;
  std::uint64_t offset_ = 0;  // bytes consumed from src_ into buf_

  std::string name_;
  std::vector<Attribute> attrs_;
  std::string text_;
  std::vector<std::string> stack_;
  bool pending_end_ = false;   // after a self-closing tag
  bool seen_root_ = false;
  bool done_ = false;
};

}  // namespace psc::xml
