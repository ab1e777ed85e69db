#include "psc/io.hpp"

#include <zlib.h>

#include <cstring>

namespace psc::io {

namespace {
constexpr std::size_t kChunk = 1 << 16;
}

// ---- FileSource ------------------------------------------------------------

FileSource::FileSource(const std::filesystem::path& path)
    : file_(std::fopen(path.c_str(), "rb")), path_(path.string()) {
  if (!file_) raise(ErrorKind::InputUnreadable, "cannot open '" + path_ + "'");
}

FileSource::~FileSource() {
  if (file_) std::fclose(file_);
}

std::size_t FileSource::read(char* dst, std::size_t n) {
  const std::size_t got = std::fread(dst, 1, n, file_);
  if (got < n && std::ferror(file_)) raise(ErrorKind::InputUnreadable, "read error on '" + path_ + "'");
  return got;
}

std::size_t MemorySource::read(char* dst, std::size_t n) {
  const std::size_t avail = data_.size() - pos_;
  const std::size_t take = n < avail ? n : avail;
  std::memcpy(dst, data_.data() + pos_, take);
  pos_ += take;
  return take;
}

// ---- GzipSource ------------------------------------------------------------

struct GzipSource::Impl {
  ByteSource& raw;
  z_stream zs{};
  std::array<char, kChunk> in{};
  bool stream_end = false;
  bool raw_eof = false;

  explicit Impl(ByteSource& r) : raw(r) {
    // 15+16: gzip framing
    if (inflateInit2(&zs, 15 + 16) != Z_OK) raise(ErrorKind::GzipError, "inflateInit failed");
  }
  ~Impl() { inflateEnd(&zs); }
};

GzipSource::GzipSource(ByteSource& raw) : impl_(std::make_unique<Impl>(raw)) {}
GzipSource::~GzipSource() = default;

std::size_t GzipSource::read(char* dst, std::size_t n) {
  auto& im = *impl_;
  if (im.stream_end) return 0;
  im.zs.next_out = reinterpret_cast<Bytef*>(dst);
  im.zs.avail_out = static_cast<uInt>(n);
  while (im.zs.avail_out > 0) {
    if (im.zs.avail_in == 0 && !im.raw_eof) {
      const std::size_t got = im.raw.read(im.in.data(), im.in.size());
      im.zs.next_in = reinterpret_cast<Bytef*>(im.in.data());
      im.zs.avail_in = static_cast<uInt>(got);
      if (got == 0) im.raw_eof = true;
    }
    const int rc = inflate(&im.zs, Z_NO_FLUSH);
    if (rc == Z_STREAM_END) {
      im.stream_end = true;
      break;
    }
    if (rc == Z_OK) {
      if (im.zs.avail_in == 0 && im.raw_eof && im.zs.avail_out > 0)
        raise(ErrorKind::GzipError, "truncated gzip stream");
      continue;
    }
    raise(ErrorKind::GzipError, std::string("corrupt gzip stream: ") +
                                    (im.zs.msg ? im.zs.msg : "inflate error"));
  }
  return n - im.zs.avail_out;
}

// ---- FileSink --------------------------------------------------------------

struct FileSink::Impl {
  std::filesystem::path target;
  std::filesystem::path tmp;
  std::FILE* file = nullptr;
  bool gzipped = false;
  bool closed = false;
  z_stream zs{};
  std::array<char, kChunk> out{};

  void fail(const std::string& what) { raise(ErrorKind::OutputUnwritable, what + " '" + target.string() + "'"); }

  void put(const char* data, std::size_t n) {
    if (n && std::fwrite(data, 1, n, file) != n) fail("write failed for");
  }

  void deflate_all(const char* data, std::size_t n, bool finish) {
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data));
    zs.avail_in = static_cast<uInt>(n);
    do {
      zs.next_out = reinterpret_cast<Bytef*>(out.data());
      zs.avail_out = static_cast<uInt>(out.size());
      const int rc = deflate(&zs, finish ? Z_FINISH : Z_NO_FLUSH);
      if (rc == Z_STREAM_ERROR) fail("gzip compression failed for");
      put(out.data(), out.size() - zs.avail_out);
      if (finish && rc == Z_STREAM_END) break;
    } while (zs.avail_in > 0 || (finish && true));
  }
};

FileSink::FileSink(const std::filesystem::path& path, bool gzipped) : impl_(std::make_unique<Impl>()) {
  impl_->target = path;
  impl_->tmp = path;
  impl_->tmp += ".tmp";
  impl_->gzipped = gzipped;
  impl_->file = std::fopen(impl_->tmp.c_str(), "wb");
  if (!impl_->file) impl_->fail("cannot open for writing");
  if (gzipped) {
    if (deflateInit2(&impl_->zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
      impl_->fail("deflateInit failed for");
  }
}

FileSink::~FileSink() {
  if (impl_ && !impl_->closed) {
    // abandoned without close(): drop the temp file
    if (impl_->gzipped) deflateEnd(&impl_->zs);
    if (impl_->file) std::fclose(impl_->file);
    std::error_code ec;
    std::filesystem::remove(impl_->tmp, ec);
  }
}

void FileSink::write(std::string_view data) {
  if (impl_->gzipped)
    impl_->deflate_all(data.data(), data.size(), false);
  else
    impl_->put(data.data(), data.size());
}

void FileSink::close() {
  auto& im = *impl_;
  if (im.closed) return;
  if (im.gzipped) {
    im.deflate_all(nullptr, 0, true);
    deflateEnd(&im.zs);
  }
  if (std::fclose(im.file) != 0) {
    im.file = nullptr;
    im.fail("close failed for");
  }
  im.file = nullptr;
  std::error_code ec;
  std::filesystem::rename(im.tmp, im.target, ec);
  if (ec) im.fail("rename failed for");
  im.closed = true;
}

// ---- LineReader ------------------------------------------------------------

bool LineReader::next(std::string& line) {
  line.clear();
  for (;;) {
    const auto nl = buf_.find('\n', pos_);
    if (nl != std::string::npos) {
      line.append(buf_, pos_, nl - pos_);
      pos_ = nl + 1;
      return true;
    }
    line.append(buf_, pos_, buf_.size() - pos_);
    buf_.clear();
    pos_ = 0;
    if (eof_) return !line.empty();
    buf_.resize(kChunk);
    const std::size_t got = src_.read(buf_.data(), buf_.size());
    buf_.resize(got);
    if (got == 0) eof_ = true;
  }
}

std::string read_file(const std::filesystem::path& path, bool gzipped) {
  FileSource file(path);
  ByteSource* src = &file;
  std::unique_ptr<GzipSource> gz;
  if (gzipped) {
    gz = std::make_unique<GzipSource>(file);
    src = gz.get();
  }
  std::string out;
  char buf[kChunk];
  for (std::size_t got; (got = src->read(buf, sizeof buf)) > 0;) out.append(buf, got);
  return out;
}

bool has_suffix(std::string_view name, std::string_view suffix) {
  return name.size() >= suffix.size() && name.substr(name.size() - suffix.size()) == suffix;
}

}  // namespace psc::io
