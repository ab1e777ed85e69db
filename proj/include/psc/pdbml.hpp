#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "psc/io.hpp"
#include "psc/seq.hpp"

namespace psc::pdbml {

/// Element and attribute names carrying the per-residue sequence records.
/// Configurable to tolerate schema-version drift; defaults match the PDBML
/// exchange schema (namespace prefixes are ignored, only local names matter).
struct SchemaNames {
  std::string seq_row = "entity_poly_seq";  // one row per residue
  std::string seq_attr_entity = "entity_id";
  std::string seq_attr_num = "num";
  std::string seq_attr_code = "mon_id";

  std::string entity_row = "entity";  // entity metadata; <type> child
  std::string entity_attr_id = "id";
  std::string poly_row = "entity_poly";  // polymer metadata; <type> child
  std::string poly_attr_entity = "entity_id";
  std::string type_field = "type";

  std::string polymer_kind = "polymer";    // entity type that is kept
  std::string excluded_poly = "nucleo";    // polymer types containing this are dropped
};

/// One polymer entity's monomer sequence as read from a single source file.
struct IngestRecord {
  std::string source_file;  // file name without directory
  std::string entity_id;
  std::vector<MonomerCode> tokens;  // ascending residue number order

  /// Row id in the sequence table: file stem + "_" + entity id.
  std::string table_id() const;

  friend bool operator==(const IngestRecord&, const IngestRecord&) = default;
};

struct IngestReport {
  std::uint64_t files_seen = 0;
  std::uint64_t files_failed = 0;
  std::uint64_t sequences_emitted = 0;
  std::uint64_t distinct_codes = 0;
};

/// Parses one PDBML document into per-entity records, ordered by entity id.
/// Entities marked non-polymer, and polymer types naming a nucleic acid, are
/// excluded; entities with no type information are kept.
/// Throws MalformedXml (with byte offset), GzipError, InvalidMonomerCode.
std::vector<IngestRecord> parse_pdbml(io::ByteSource& content, bool gzipped,
                                      const std::string& source_file,
                                      const SchemaNames& schema = {});

struct IngestOptions {
  std::size_t jobs = 0;  // 0 = hardware concurrency
  SchemaNames schema;
};

/// Parses every *.xml / *.xml.gz directly under input_dir (lexicographic
/// order) and writes the gzip CSV sequence table. Files that fail to parse
/// are counted and reported on stderr; only an unwritable output aborts.
IngestReport ingest_corpus(const std::filesystem::path& input_dir,
                           const std::filesystem::path& output,
                           const IngestOptions& options = {});

/// Sequence table serialization: gzip CSV, header "id,tokens", tokens joined
/// by '-'. Reading accepts plain CSV when the path does not end in ".gz".
void write_table(const std::filesystem::path& path, std::span<const ProteinSequence> rows);
std::vector<ProteinSequence> read_table(const std::filesystem::path& path);

}  // namespace psc::pdbml
