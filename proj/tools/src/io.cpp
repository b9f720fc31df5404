#include "bintopo/bench/io.hpp"

#include "bintopo/error.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bintopo::bench {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, std::string_view schema,
                     const std::vector<std::string>& columns)
    : path_(path) {
  buffer_ += "# ";
  buffer_ += schema;
  buffer_ += '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += columns[i];
  }
  buffer_ += '\n';
}

CsvWriter::~CsvWriter() {
  try {
    close();
  } catch (...) {
  }
}

void CsvWriter::close() {
  if (closed_) return;
  if (row_started_) end_row();
  closed_ = true;
  write_text(path_, buffer_);
}

void CsvWriter::sep() {
  if (row_started_) buffer_ += ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::cell(double v) {
  sep();
  buffer_ += format_number(v);
  return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
  sep();
  buffer_ += std::to_string(v);
  return *this;
}

CsvWriter& CsvWriter::cell(std::string_view s) {
  sep();
  buffer_ += s;
  return *this;
}

CsvWriter& CsvWriter::empty() {
  sep();
  return *this;
}

void CsvWriter::end_row() {
  buffer_ += '\n';
  row_started_ = false;
}

void write_pgm(const std::string& path, const Mesh& mesh, const DensityVector& x) {
  std::ostringstream os;
  os << "P2\n# solid=0 void=200 outside=255\n" << mesh.nx() << ' ' << mesh.ny() << "\n255\n";
  for (int ey = mesh.ny() - 1; ey >= 0; --ey) {
    for (int ex = 0; ex < mesh.nx(); ++ex) {
      const int e = mesh.element_at(ex, ey);
      const int level = e < 0 ? 255 : (x.solid(static_cast<std::size_t>(e)) ? 0 : 200);
      os << level << (ex + 1 < mesh.nx() ? ' ' : '\n');
    }
  }
  write_text(path, os.str());
}

void write_topology_csv(const std::string& path, const Mesh& mesh, const DensityVector& x) {
  CsvWriter w(path, "bintopo topology v1", {"element", "ex", "ey", "x"});
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    w.cell(e).cell(mesh.element(e).ex).cell(mesh.element(e).ey).cell(x.solid(e) ? 1 : 0);
    w.end_row();
  }
  w.close();
}

DensityVector read_topology_csv(const std::string& path, const Mesh& mesh) {
  std::istringstream in(read_text(path));
  std::string line;
  DensityVector x(mesh.element_count(), false);
  std::vector<char> seen(mesh.element_count(), 0);
  bool header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    long long e = -1, ex = 0, ey = 0, v = -1;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream ls(line);
    if (!(ls >> e >> c1 >> ex >> c2 >> ey >> c3 >> v) || c1 != ',' || c2 != ',' || c3 != ',') {
      fail(ErrorCode::io, path + ":" + std::to_string(line_no) + ": malformed topology row");
    }
    if (e < 0 || e >= static_cast<long long>(mesh.element_count()) ||
        mesh.element(static_cast<std::size_t>(e)).ex != ex ||
        mesh.element(static_cast<std::size_t>(e)).ey != ey || (v != 0 && v != 1)) {
      fail(ErrorCode::io, path + ":" + std::to_string(line_no) + ": row does not match the mesh");
    }
    x.set(static_cast<std::size_t>(e), v == 1);
    seen[static_cast<std::size_t>(e)] = 1;
  }
  for (std::size_t e = 0; e < seen.size(); ++e) {
    if (!seen[e]) fail(ErrorCode::io, path + ": element " + std::to_string(e) + " missing");
  }
  return x;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorCode::io, "write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory " + path + ": " + ec.message());
}

}  // namespace bintopo::bench
