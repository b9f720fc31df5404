#pragma once

#include "bintopo/mesh_fem.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace bintopo::bench {

// Shortest round-trip decimal, independent of locale.
std::string format_number(double v);

class CsvWriter {
 public:
  // Writes the schema line and the column header.
  CsvWriter(const std::string& path, std::string_view schema, const std::vector<std::string>& columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::string_view s);
  CsvWriter& empty();
  void end_row();
  // Flushes to disk; throws on failure. Called by the destructor otherwise.
  void close();

 private:
  void sep();
  std::string buffer_;
  std::string path_;
  bool row_started_ = false;
  bool closed_ = false;
};

// P2 map of the bounding grid, top row first: solid 0, void 200, outside 255.
void write_pgm(const std::string& path, const Mesh& mesh, const DensityVector& x);
void write_topology_csv(const std::string& path, const Mesh& mesh, const DensityVector& x);
DensityVector read_topology_csv(const std::string& path, const Mesh& mesh);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
void ensure_directory(const std::string& path);

}  // namespace bintopo::bench
