#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace gridtwin {

// Shortest decimal string that round-trips to the same double. All numeric
// output in the toolkit goes through this so artifacts are reproducible
// byte for byte across runs.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Plain numeric CSV, no header. Every cell uses format_double.
std::string matrix_to_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_csv(const std::string& text);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// FNV-1a, used for artifact content hashes in run manifests.
std::uint64_t fnv1a_hash(const std::string& data);
std::string to_hex(std::uint64_t value);

// Grayscale PGM (plain P2) of |m| scaled so the largest magnitude maps to
// 255. Pixel row r, column c shows entry (c, r): the image is the transpose
// of the matrix, so for a Jacobian image the x axis walks the injection rows
// and the y axis walks the state columns.
std::string matrix_to_pgm(const Eigen::MatrixXd& m);

}  // namespace gridtwin
