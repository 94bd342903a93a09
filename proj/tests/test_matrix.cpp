#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "odml/error.hpp"
#include "odml/matrix.hpp"

using namespace odml;

TEST_CASE("construction, indexing, equality") {
  Matrix m(2, 3, 1.5);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 1.5);
  m(0, 1) = -2.0;
  CHECK(m(0, 1) == -2.0);

  Matrix v = Matrix::row_vector({1.0, 2.0, 3.0});
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 3);
  CHECK(v(0, 2) == 3.0);

  CHECK(Matrix(2, 2, {1, 2, 3, 4}) == Matrix(2, 2, {1, 2, 3, 4}));
  CHECK(Matrix(2, 2, {1, 2, 3, 4}) != Matrix(2, 2, {1, 2, 3, 5}));
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("matmul against a worked example") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
  Matrix c = matmul(a, b);
  CHECK(c == Matrix(2, 2, {58, 64, 139, 154}));
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("matmul identity and zero behavior") {
  Matrix a(2, 2, {1, 2, 3, 4});
  Matrix eye(2, 2, {1, 0, 0, 1});
  CHECK(matmul(a, eye) == a);
  CHECK(matmul(eye, a) == a);
  Matrix z(2, 2);
  CHECK(matmul(a, z) == z);
}

TEST_CASE("transpose round-trips") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix t = transpose(a);
  CHECK(t.rows() == 3);
  CHECK(t(0, 1) == 4);
  CHECK(transpose(t) == a);
}

TEST_CASE("axpy accumulates with scale") {
  Matrix a(1, 3, {1, 1, 1});
  Matrix b(1, 3, {1, 2, 3});
  axpy(a, b, 2.0);
  CHECK(a == Matrix(1, 3, {3, 5, 7}));
  Matrix wrong(2, 3);
  CHECK_THROWS_AS(axpy(a, wrong), DimensionError);
}

TEST_CASE("hconcat stitches blocks in order") {
  std::vector<Matrix> blocks{Matrix(2, 1, {1, 4}), Matrix(2, 2, {2, 3, 5, 6})};
  Matrix joined = hconcat(blocks);
  CHECK(joined == Matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  std::vector<Matrix> bad{Matrix(2, 1), Matrix(3, 1)};
  CHECK_THROWS_AS(hconcat(bad), DimensionError);
  CHECK_THROWS_AS(hconcat(std::span<const Matrix>{}), DimensionError);
}

TEST_CASE("slice_cols inverts hconcat") {
  Matrix joined(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(slice_cols(joined, 0, 1) == Matrix(2, 1, {1, 4}));
  CHECK(slice_cols(joined, 1, 2) == Matrix(2, 2, {2, 3, 5, 6}));
  CHECK_THROWS_AS(slice_cols(joined, 2, 2), DimensionError);
}

TEST_CASE("distance and dot kernels") {
  std::vector<double> a{1, 2, 2};
  std::vector<double> b{1, 0, 0};
  CHECK(squared_distance(a, b) == 8.0);
  CHECK(euclidean_distance(a, b) == doctest::Approx(std::sqrt(8.0)));
  CHECK(dot(a, b) == 1.0);
  CHECK(norm(a) == 3.0);
  std::vector<double> shorter{1.0};
  CHECK_THROWS_AS((void)dot(a, shorter), DimensionError);
  CHECK_THROWS_AS((void)squared_distance(a, shorter), DimensionError);
}

TEST_CASE("finiteness guards") {
  Matrix ok(1, 2, {0.0, 1.0});
  CHECK(ok.all_finite());
  require_finite(ok, "test");
  Matrix bad(1, 2, {0.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_FALSE(bad.all_finite());
  CHECK_THROWS_AS(require_finite(bad, "test"), NumericError);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(require_finite(bad, "test"), NumericError);
}

TEST_CASE("shape guard names both shapes") {
  Matrix m(2, 3);
  require_shape(m, 2, 3, "here");
  CHECK_THROWS_WITH_AS(require_shape(m, 3, 2, "here"),
                       "here: expected 3x2, got 2x3", DimensionError);
}
