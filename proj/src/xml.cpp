#include "psc/xml.hpp"

#include <cctype>

namespace psc::xml {

namespace {

constexpr std::size_t kChunk = 1 << 16;

bool name_start_char(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
}

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' || c == '.';
}

bool ws(int c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

std::string_view local_name(std::string_view qualified) noexcept {
  const auto colon = qualified.rfind(':');
  return colon == std::string_view::npos ? qualified : qualified.substr(colon + 1);
}

PullParser::PullParser(io::ByteSource& src) : src_(src) {}

void PullParser::fail(const std::string& what) const {
  raise(ErrorKind::MalformedXml, what + " at byte offset " + std::to_string(offset()));
}

bool PullParser::fill() {
  if (eof_) return false;
  if (pos_ > 0) {
    buf_.erase(0, pos_);
    pos_ = 0;
  }
  const std::size_t old = buf_.size();
  buf_.resize(old + kChunk);
  const std::size_t got = src_.read(buf_.data() + old, kChunk);
  buf_.resize(old + got);
  offset_ += got;
  if (got == 0) {
    eof_ = true;
    return false;
  }
  return true;
}

int PullParser::peek() {
  if (pos_ >= buf_.size() && !fill()) return -1;
  return static_cast<unsigned char>(buf_[pos_]);
}

int PullParser::get() {
  const int c = peek();
  if (c >= 0) ++pos_;
  return c;
}

void PullParser::expect(char c, const char* context) {
  const int got = get();
  if (got != c) fail(std::string("expected '") + c + "' in " + context);
}

void PullParser::skip_whitespace() {
  while (ws(peek())) ++pos_;
}

std::string PullParser::read_name(const char* context) {
  int c = peek();
  if (c < 0 || !name_start_char(static_cast<char>(c)))
    fail(std::string("expected name in ") + context);
  std::string out;
  while ((c = peek()) >= 0 && name_char(static_cast<char>(c))) out.push_back(static_cast<char>(get()));
  return out;
}

void PullParser::decode_entity(std::string& out) {
  // called after consuming '&'
  std::string ent;
  int c;
  while ((c = get()) >= 0 && c != ';') {
    ent.push_back(static_cast<char>(c));
    if (ent.size() > 10) fail("unterminated entity reference");
  }
  if (c < 0) fail("unterminated entity reference");
  if (ent == "lt") out.push_back('<');
  else if (ent == "gt") out.push_back('>');
  else if (ent == "amp") out.push_back('&');
  else if (ent == "apos") out.push_back('\'');
  else if (ent == "quot") out.push_back('"');
  else if (!ent.empty() && ent[0] == '#') {
    long code = 0;
    try {
      code = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X'))
                 ? std::stol(ent.substr(2), nullptr, 16)
                 : std::stol(ent.substr(1), nullptr, 10);
    } catch (const std::exception&) {
      fail("bad character reference '&" + ent + ";'");
    }
    if (code < 1 || code > 0x10FFFF) fail("character reference out of range");
    // UTF-8 encode
    const auto cp = static_cast<unsigned long>(code);
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  } else {
    fail("unknown entity '&" + ent + ";'");
  }
}

void PullParser::read_attr_value(std::string& out) {
  const int quote = get();
  if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
  int c;
  while ((c = get()) != quote) {
    if (c < 0) fail("unterminated attribute value");
    if (c == '<') fail("'<' in attribute value");
    if (c == '&')
      decode_entity(out);
    else
      out.push_back(static_cast<char>(c));
  }
}

bool PullParser::read_markup_prolog() {
  // called with pos_ just after '<'; peek is '?' or '!'
  const int c = peek();
  if (c == '?') {
    ++pos_;
    // skip to '?>'
    int prev = 0, cur;
    while ((cur = get()) >= 0) {
      if (prev == '?' && cur == '>') return true;
      prev = cur;
    }
    fail("unterminated processing instruction");
  }
  if (c == '!') {
    ++pos_;
    if (peek() == '-') {
      ++pos_;
      expect('-', "comment");
      int a = 0, b = 0, cur;
      while ((cur = get()) >= 0) {
        if (a == '-' && b == '-') {
          if (cur == '>') return true;
          fail("'--' inside comment");
        }
        a = b;
        b = cur;
      }
      fail("unterminated comment");
    }
    if (peek() == '[') {
      // <![CDATA[ ... ]]>
      static constexpr std::string_view kCdata = "[CDATA[";
      for (char want : kCdata) {
        if (get() != want) fail("malformed CDATA section");
      }
      int a = 0, b = 0, cur;
      while ((cur = get()) >= 0) {
        if (a == ']' && b == ']' && cur == '>') {
          text_.resize(text_.size() - 2);  // drop the buffered "]]"
          return true;
        }
        text_.push_back(static_cast<char>(cur));
        a = b;
        b = cur;
      }
      fail("unterminated CDATA section");
    }
    // DOCTYPE or other declaration: skip to '>' (no internal subset support)
    int cur;
    while ((cur = get()) >= 0) {
      if (cur == '[') fail("DTD internal subset not supported");
      if (cur == '>') return true;
    }
    fail("unterminated markup declaration");
  }
  return false;
}

void PullParser::parse_start_tag() {
  name_ = read_name("start tag");
  attrs_.clear();
  for (;;) {
    skip_whitespace();
    const int c = peek();
    if (c < 0) fail("unterminated start tag");
    if (c == '>') {
      ++pos_;
      stack_.push_back(name_);
      return;
    }
    if (c == '/') {
      ++pos_;
      expect('>', "empty-element tag");
      stack_.push_back(name_);
      pending_end_ = true;  // synthesize the EndElement on the next call
      return;
    }
    Attribute attr;
    attr.name = read_name("attribute");
    skip_whitespace();
    expect('=', "attribute");
    skip_whitespace();
    read_attr_value(attr.value);
    attrs_.push_back(std::move(attr));
  }
}

void PullParser::parse_end_tag() {
  name_ = read_name("end tag");
  skip_whitespace();
  expect('>', "end tag");
  if (stack_.empty()) fail("end tag '" + name_ + "' without open element");
  if (stack_.back() != name_)
    fail("end tag '" + name_ + "' does not match open element '" + stack_.back() + "'");
  stack_.pop_back();
}

const Attribute* PullParser::find_attribute(std::string_view local) const noexcept {
  for (const auto& a : attrs_) {
    if (local_name(a.name) == local) return &a;
  }
  return nullptr;
}

PullParser::Event PullParser::next() {
  if (pending_end_) {
    pending_end_ = false;
    name_ = stack_.back();
    stack_.pop_back();
    return Event::EndElement;
  }
  if (done_) return Event::EndOfDocument;

  text_.clear();
  for (;;) {
    const int c = peek();
    if (c < 0) {
      if (!stack_.empty()) fail("unexpected end of input with open element '" + stack_.back() + "'");
      if (!seen_root_) fail("document has no root element");
      done_ = true;
      return Event::EndOfDocument;
    }
    if (c == '<') {
      if (!text_.empty()) return Event::Text;  // emit pending character data first
      ++pos_;
      const int c2 = peek();
      if (c2 == '?' || c2 == '!') {
        const std::size_t before = text_.size();
        if (read_markup_prolog()) {
          if (text_.size() != before) return Event::Text;  // CDATA payload
          continue;
        }
        fail("malformed markup");
      }
      if (c2 == '/') {
        ++pos_;
        parse_end_tag();
        return Event::EndElement;
      }
      if (stack_.empty() && seen_root_) fail("content after root element");
      parse_start_tag();
      seen_root_ = true;
      return Event::StartElement;
    }
    // character data
    if (stack_.empty()) {
      if (!ws(c)) fail("character data outside root element");
      ++pos_;
      continue;
    }
    if (c == '&') {
      ++pos_;
      decode_entity(text_);
      continue;
    }
    // bulk-append up to the next markup or entity reference
    std::size_t scan = pos_;
    while (scan < buf_.size() && buf_[scan] != '<' && buf_[scan] != '&') ++scan;
    text_.append(buf_, pos_, scan - pos_);
    pos_ = scan;
  }
}

}  // namespace psc::xml
