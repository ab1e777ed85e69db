#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "psc/errors.hpp"

namespace psc::io {

/// Pull-based byte stream; read returns 0 at end of input.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::size_t read(char* dst, std::size_t n) = 0;
};

class FileSource final : public ByteSource {
 public:
  explicit FileSource(const std::filesystem::path& path);
  ~FileSource() override;
  FileSource(const FileSource&) = delete;
  FileSource& operator=(const FileSource&) = delete;
  std::size_t read(char* dst, std::size_t n) override;

 private:
  std::FILE* file_;
  std::string path_;
};

class MemorySource final : public ByteSource {
 public:
  explicit MemorySource(std::string_view data) : data_(data) {}
  std::size_t read(char* dst, std::size_t n) override;

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

/// Streaming gzip decoder over another source.
/// Throws GzipError on corrupt or truncated input.
class GzipSource final : public ByteSource {
 public:
  explicit GzipSource(ByteSource& raw);
  ~GzipSource() override;
  GzipSource(const GzipSource&) = delete;
  GzipSource& operator=(const GzipSource&) = delete;
  std::size_t read(char* dst, std::size_t n) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Buffered writer to a file, optionally gzip-compressing. All writes go to a
/// temporary sibling file that replaces the target on close() (atomic rename).
/// Throws OutputUnwritable.
class FileSink {
 public:
  FileSink(const std::filesystem::path& path, bool gzipped);
  ~FileSink();
  FileSink(const FileSink&) = delete;
  FileSink& operator=(const FileSink&) = delete;

  void write(std::string_view data);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits a byte source into LF-terminated lines (final unterminated line
/// included; CR kept if present, since callers write plain LF).
class LineReader {
 public:
  explicit LineReader(ByteSource& src) : src_(src) {}
  bool next(std::string& line);

 private:
  ByteSource& src_;
  std::string buf_;
  std::size_t pos_ = 0;
  bool eof_ = false;
};

/// Reads the whole (optionally gzipped) file.
std::string read_file(const std::filesystem::path& path, bool gzipped);

bool has_suffix(std::string_view name, std::string_view suffix);

}  // namespace psc::io
