#include "qrgmm/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qrgmm/errors.hpp"

namespace qrgmm {
namespace {

void append_shortest(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.append(buf, ptr);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, const std::string& path,
                  size_t line_no) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw CorruptFile(path + ":" + std::to_string(line_no) +
                      ": cannot parse '" + cell + "' as a number");
  return value;
}

// Header cells must be name1..nameK for one or two name groups; returns the
// count per group. Trailing '\r' from CRLF files is tolerated.
std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

int count_prefixed(const std::vector<std::string>& cells, size_t start,
                   const std::string& prefix) {
  int count = 0;
  for (size_t i = start; i < cells.size(); ++i) {
    if (cells[i] == prefix + std::to_string(count + 1)) ++count;
    else break;
  }
  return count;
}

Eigen::MatrixXd read_rows(std::ifstream& in, Eigen::Index cols,
                          const std::string& path) {
  std::vector<double> values;
  std::string line;
  size_t line_no = 1;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != cols)
      throw CorruptFile(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(cols) + " cells, found " +
                        std::to_string(cells.size()));
    for (const auto& cell : cells)
      values.push_back(parse_cell(cell, path, line_no));
    ++rows;
  }
  if (rows == 0) throw CorruptFile(path + ": no data rows");
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      out(r, c) = values[static_cast<size_t>(r * cols + c)];
  return out;
}

void write_matrix_rows(std::ofstream& out,
                       const Eigen::Ref<const Eigen::MatrixXd>& m) {
  std::string line;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    line.clear();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) line += ',';
      append_shortest(line, m(r, c));
    }
    line += '\n';
    out << line;
  }
}

}  // namespace

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorruptFile("cannot open " + path + " for writing");
  std::string header;
  for (Eigen::Index c = 0; c < data.p(); ++c)
    header += (c ? ",x" : "x") + std::to_string(c + 1);
  for (Eigen::Index c = 0; c < data.outputs(); ++c)
    header += ",y" + std::to_string(c + 1);
  out << header << '\n';
  Eigen::MatrixXd joined(data.n(), data.p() + data.outputs());
  joined.leftCols(data.p()) = data.design;
  joined.rightCols(data.outputs()) = data.response;
  write_matrix_rows(out, joined);
  if (!out) throw CorruptFile("write to " + path + " failed");
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorruptFile("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw CorruptFile(path + ": empty file");
  const auto cells = split_line(strip_cr(header));
  const int p = count_prefixed(cells, 0, "x");
  const int d = count_prefixed(cells, static_cast<size_t>(p), "y");
  if (p < 1 || d < 1 ||
      static_cast<size_t>(p + d) != cells.size())
    throw CorruptFile(path + ": header must be x1..xp,y1..yd, got '" +
                      header + "'");
  const Eigen::MatrixXd all = read_rows(in, p + d, path);
  return validate_dataset(all.leftCols(p), Eigen::MatrixXd(all.rightCols(d)));
}

void write_samples_csv(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorruptFile("cannot open " + path + " for writing");
  std::string header;
  for (Eigen::Index c = 0; c < samples.cols(); ++c)
    header += (c ? ",y" : "y") + std::to_string(c + 1);
  out << header << '\n';
  write_matrix_rows(out, samples);
  if (!out) throw CorruptFile("write to " + path + " failed");
}

Eigen::MatrixXd read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorruptFile("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw CorruptFile(path + ": empty file");
  const auto cells = split_line(strip_cr(header));
  const int d = count_prefixed(cells, 0, "y");
  if (d < 1 || static_cast<size_t>(d) != cells.size())
    throw CorruptFile(path + ": header must be y1..yd, got '" + header + "'");
  return read_rows(in, d, path);
}

}  // namespace qrgmm
