#include "psc/pdbml.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>
#include <utility>

#include "psc/xml.hpp"

namespace psc::pdbml {

namespace {

std::string trimmed(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lowered(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string file_stem(std::string_view name) {
  if (io::has_suffix(name, ".xml.gz")) return std::string(name.substr(0, name.size() - 7));
  if (io::has_suffix(name, ".xml")) return std::string(name.substr(0, name.size() - 4));
  return std::string(name);
}

}  // namespace

std::string IngestRecord::table_id() const {
  return file_stem(source_file) + "_" + entity_id;
}

std::vector<IngestRecord> parse_pdbml(io::ByteSource& content, bool gzipped,
                                      const std::string& source_file,
                                      const SchemaNames& schema) {
  io::ByteSource* src = &content;
  std::unique_ptr<io::GzipSource> gz;
  if (gzipped) {
    gz = std::make_unique<io::GzipSource>(content);
    src = gz.get();
  }
  xml::PullParser parser(*src);

  struct Row {
    long long num;
    MonomerCode code;
  };
  std::map<std::string, std::vector<Row>> rows;      // entity id -> residues
  std::map<std::string, std::string> entity_type;    // from <entity><type>
  std::map<std::string, std::string> poly_type;      // from <entity_poly><type>

  std::vector<std::string> path;  // local names of open elements
  std::string cur_entity, cur_poly;
  std::string type_text;
  std::map<std::string, std::string>* type_target = nullptr;
  std::string type_key;

  auto attr_or_fail = [&](const std::string& local) -> std::string {
    const xml::Attribute* a = parser.find_attribute(local);
    if (a == nullptr)
      raise(ErrorKind::MalformedXml, source_file + ": <" + schema.seq_row + "> missing " +
                                         local + " near byte " + std::to_string(parser.offset()));
    return trimmed(a->value);
  };

  for (;;) {
    xml::PullParser::Event ev = parser.next();
    if (ev == xml::PullParser::Event::EndOfDocument) break;

    if (ev == xml::PullParser::Event::Text) {
      if (type_target != nullptr) type_text += parser.text();
      continue;
    }

    std::string local(xml::local_name(parser.name()));
    if (ev == xml::PullParser::Event::StartElement) {
      if (local == schema.seq_row) {
        std::string entity = attr_or_fail(schema.seq_attr_entity);
        std::string num_text = attr_or_fail(schema.seq_attr_num);
        std::string code = attr_or_fail(schema.seq_attr_code);
        char* end = nullptr;
        long long num = std::strtoll(num_text.c_str(), &end, 10);
        if (num_text.empty() || end == nullptr || *end != '\0')
          raise(ErrorKind::MalformedXml,
                source_file + ": non-numeric residue number \"" + num_text + "\" near byte " +
                    std::to_string(parser.offset()));
        rows[entity].push_back(Row{num, MonomerCode(code)});
      } else if (local == schema.entity_row) {
        const xml::Attribute* a = parser.find_attribute(schema.entity_attr_id);
        cur_entity = a != nullptr ? trimmed(a->value) : std::string();
      } else if (local == schema.poly_row) {
        const xml::Attribute* a = parser.find_attribute(schema.poly_attr_entity);
        cur_poly = a != nullptr ? trimmed(a->value) : std::string();
      } else if (local == schema.type_field && !path.empty()) {
        if (path.back() == schema.entity_row && !cur_entity.empty()) {
          type_target = &entity_type;
          type_key = cur_entity;
          type_text.clear();
        } else if (path.back() == schema.poly_row && !cur_poly.empty()) {
          type_target = &poly_type;
          type_key = cur_poly;
          type_text.clear();
        }
      }
      path.push_back(std::move(local));
    } else {  // EndElement
      if (type_target != nullptr && local == schema.type_field) {
        (*type_target)[type_key] = trimmed(type_text);
        type_target = nullptr;
      } else if (local == schema.entity_row) {
        cur_entity.clear();
      } else if (local == schema.poly_row) {
        cur_poly.clear();
      }
      path.pop_back();
    }
  }

  std::vector<IngestRecord> out;
  for (auto& [entity, residues] : rows) {
    auto et = entity_type.find(entity);
    if (et != entity_type.end() && et->second != schema.polymer_kind) continue;
    auto pt = poly_type.find(entity);
    if (pt != poly_type.end() &&
        lowered(pt->second).find(schema.excluded_poly) != std::string::npos)
      continue;
    std::stable_sort(residues.begin(), residues.end(),
                     [](const Row& a, const Row& b) { return a.num < b.num; });
    IngestRecord rec;
    rec.source_file = source_file;
    rec.entity_id = entity;
    rec.tokens.reserve(residues.size());
    for (Row& r : residues) rec.tokens.push_back(std::move(r.code));
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

std::string joined_tokens(std::span<const MonomerCode> tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != 0) s += '-';
    s += tokens[i].str();
  }
  return s;
}

struct FileResult {
  std::vector<IngestRecord> records;
  std::string error;  // non-empty on failure
};

}  // namespace

IngestReport ingest_corpus(const std::filesystem::path& input_dir,
                           const std::filesystem::path& output,
                           const IngestOptions& options) {
  std::error_code ec;
  if (!std::filesystem::is_directory(input_dir, ec))
    raise(ErrorKind::InputUnreadable, "not a directory: " + input_dir.string());

  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(input_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (io::has_suffix(name, ".xml") || io::has_suffix(name, ".xml.gz"))
      names.push_back(std::move(name));
  }
  std::sort(names.begin(), names.end());

  std::size_t jobs = options.jobs != 0 ? options.jobs : std::thread::hardware_concurrency();
  if (jobs == 0) jobs = 1;

  IngestReport report;
  report.files_seen = names.size();
  std::set<std::string> codes;

  io::FileSink sink(output, /*gzipped=*/true);
  sink.write("id,tokens\n");

  auto parse_one = [&](const std::string& name, FileResult& slot) {
    try {
      io::FileSource file(input_dir / name);
      slot.records = parse_pdbml(file, io::has_suffix(name, ".gz"), name, options.schema);
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  };
  auto consume = [&](const std::string& name, FileResult& slot) {
    if (!slot.error.empty()) {
      ++report.files_failed;
      std::fprintf(stderr, "ingest: skipping %s: %s\n", name.c_str(), slot.error.c_str());
      return;
    }
    for (const IngestRecord& rec : slot.records) {
      sink.write(rec.table_id() + "," + joined_tokens(rec.tokens) + "\n");
      ++report.sequences_emitted;
      for (const MonomerCode& code : rec.tokens) codes.insert(code.str());
    }
  };

  if (jobs <= 1) {
    for (const std::string& name : names) {
      FileResult slot;
      parse_one(name, slot);
      consume(name, slot);
    }
  } else {
    // Waves of parallel parses, consumed in order so output is deterministic.
    const std::size_t wave = jobs * 4;
    for (std::size_t base = 0; base < names.size(); base += wave) {
      std::size_t count = std::min(wave, names.size() - base);
      std::vector<FileResult> slots(count);
      std::atomic<std::size_t> cursor{0};
      std::vector<std::thread> workers;
      std::size_t nthreads = std::min(jobs, count);
      workers.reserve(nthreads);
      for (std::size_t t = 0; t < nthreads; ++t) {
        workers.emplace_back([&] {
          for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= count) return;
            parse_one(names[base + i], slots[i]);
          }
        });
      }
      for (std::thread& w : workers) w.join();
      for (std::size_t i = 0; i < count; ++i) consume(names[base + i], slots[i]);
    }
  }

  sink.close();
  report.distinct_codes = codes.size();
  return report;
}

void write_table(const std::filesystem::path& path, std::span<const ProteinSequence> rows) {
  io::FileSink sink(path, io::has_suffix(path.string(), ".gz"));
  sink.write("id,tokens\n");
  for (const ProteinSequence& row : rows)
    sink.write(row.id + "," + joined_tokens(row.tokens) + "\n");
  sink.close();
}

std::vector<ProteinSequence> read_table(const std::filesystem::path& path) {
  io::FileSource file(path);
  std::unique_ptr<io::GzipSource> gz;
  io::ByteSource* src = &file;
  if (io::has_suffix(path.string(), ".gz")) {
    gz = std::make_unique<io::GzipSource>(file);
    src = gz.get();
  }
  io::LineReader lines(*src);

  std::string line;
  if (!lines.next(line) || trimmed(line) != "id,tokens")
    raise(ErrorKind::BadTableFormat, path.string() + ": missing \"id,tokens\" header");

  std::vector<ProteinSequence> out;
  std::size_t lineno = 1;
  while (lines.next(line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size())
      raise(ErrorKind::BadTableFormat,
            path.string() + ":" + std::to_string(lineno) + ": expected id,tokens");
    std::string id = line.substr(0, comma);
    std::vector<MonomerCode> tokens;
    std::size_t start = comma + 1;
    while (start <= line.size()) {
      std::size_t dash = line.find('-', start);
      std::size_t end = dash == std::string::npos ? line.size() : dash;
      tokens.emplace_back(line.substr(start, end - start));  // validates the code
      if (dash == std::string::npos) break;
      start = dash + 1;
    }
    out.emplace_back(std::move(id), std::move(tokens));
  }
  return out;
}

}  // namespace psc::pdbml
