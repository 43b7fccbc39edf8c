#include "gridtwin/io_util.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "gridtwin/errors.hpp"

namespace gridtwin {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return std::signbit(v) ? "-0" : "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path);
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failure on " + path);
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * 12 + 16);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

Eigen::MatrixXd matrix_from_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        ++line_no;
        std::string_view line(text.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t cell_start = 0;
        while (cell_start <= line.size()) {
            std::size_t comma = line.find(',', cell_start);
            if (comma == std::string_view::npos) comma = line.size();
            std::string_view cell = line.substr(cell_start, comma - cell_start);
            std::size_t a = 0, b = cell.size();
            while (a < b && std::isspace(static_cast<unsigned char>(cell[a]))) ++a;
            while (b > a && std::isspace(static_cast<unsigned char>(cell[b - 1]))) --b;
            cell = cell.substr(a, b - a);
            double value = 0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
                throw ParseError(line_no, "bad numeric cell '" + std::string(cell) + "'");
            row.push_back(value);
            if (comma == line.size()) break;
            cell_start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(line_no, "ragged csv row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
    write_text_file(path, matrix_to_csv(m));
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    return matrix_from_csv(read_text_file(path));
}

std::uint64_t fnv1a_hash(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return s;
}

std::string matrix_to_pgm(const Eigen::MatrixXd& m) {
    const Eigen::Index w = m.rows();  // image width walks matrix rows
    const Eigen::Index h = m.cols();
    double peak = 0.0;
    if (m.size() > 0) peak = m.cwiseAbs().maxCoeff();
    std::string out = "P2\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            int gray = 0;
            if (peak > 0.0)
                gray = static_cast<int>(std::lround(255.0 * std::abs(m(x, y)) / peak));
            gray = std::clamp(gray, 0, 255);
            if (x > 0) out += ' ';
            out += std::to_string(gray);
        }
        out += '\n';
    }
    return out;
}

}  // namespace gridtwin
