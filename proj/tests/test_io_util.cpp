#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>

#include "doctest.h"

#include "gridtwin/errors.hpp"
#include "gridtwin/io_util.hpp"

using namespace gridtwin;

TEST_SUITE("io_util") {

TEST_CASE("format_double picks the shortest round-trip form") {
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-1.25) == "-1.25");
    CHECK(format_double(100.0) == "100");
}

TEST_CASE("format_double round-trips exactly") {
    const double values[] = {1.0 / 3.0,       0.1,   -2.5e-7, 1e300, -1e-300,
                             3.141592653589793, 9.675, 1e15,   5e-324};
    for (double v : values) {
        const std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}

TEST_CASE("csv round-trips a random matrix exactly") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(7, 5);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng) * 1e3;
    m(0, 0) = 0.0;
    m(3, 2) = -1e-12;

    const Eigen::MatrixXd back = matrix_from_csv(matrix_to_csv(m));
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix_from_csv rejects ragged rows") {
    CHECK_THROWS_AS(matrix_from_csv("1,2,3\n4,5\n"), ParseError);
    CHECK_THROWS_AS(matrix_from_csv("1,oops\n"), ParseError);
}

TEST_CASE("text file round trip") {
    const std::string path = "io_util_tmp.txt";
    const std::string body = "line one\nline two, with commas\n";
    write_text_file(path, body);
    CHECK(read_text_file(path) == body);
    std::remove(path.c_str());

    CHECK_THROWS_AS(read_text_file("definitely/not/here.txt"), IoError);
}

TEST_CASE("fnv1a hash is stable and content sensitive") {
    CHECK(fnv1a_hash("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a_hash("abc") == fnv1a_hash("abc"));
    CHECK(fnv1a_hash("abc") != fnv1a_hash("acb"));
    CHECK(to_hex(0x2a) == "000000000000002a");
    CHECK(to_hex(fnv1a_hash("")) == "cbf29ce484222325");
}

TEST_CASE("pgm transposes the matrix so injections run along x") {
    Eigen::MatrixXd m(2, 3);
    m.setZero();
    m(0, 2) = 1.0;   // peak
    m(1, 0) = -0.5;  // magnitude, sign dropped

    const std::string pgm = matrix_to_pgm(m);
    // width = rows, height = cols, then one raster line per matrix column
    CHECK(pgm == "P2\n2 3\n255\n0 128\n0 0\n255 0\n");
}

TEST_CASE("pgm of an all-zero matrix stays black") {
    const std::string pgm = matrix_to_pgm(Eigen::MatrixXd::Zero(2, 2));
    CHECK(pgm == "P2\n2 2\n255\n0 0\n0 0\n");
}

}  // TEST_SUITE
