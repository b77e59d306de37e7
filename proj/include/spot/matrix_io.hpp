// matrix_io.hpp
// Plain-text matrix dumps: "# <header>" line, "rows cols" line, then one
// whitespace-separated row per line at full double precision.

#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>

namespace spot {

void write_text_matrix(const std::filesystem::path& path, const std::string& header,
                       const Eigen::MatrixXd& m);

Eigen::MatrixXd read_text_matrix(const std::filesystem::path& path);

}  // namespace spot
