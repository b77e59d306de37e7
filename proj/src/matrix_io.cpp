// matrix_io.cpp

#include "spot/matrix_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>

#include "spot/common.hpp"

namespace spot {

void write_text_matrix(const std::filesystem::path& path, const std::string& header,
                       const Eigen::MatrixXd& m) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "# " << header << '\n' << m.rows() << ' ' << m.cols() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
    os << '\n';
  }
  if (!os) throw Error("write failed for " + path.string());
}

Eigen::MatrixXd read_text_matrix(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::string header;
  std::getline(is, header);
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) throw Error("bad matrix dims in " + path.string());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(is >> m(r, c))) throw Error("truncated matrix in " + path.string());
  return m;
}

}  // namespace spot
