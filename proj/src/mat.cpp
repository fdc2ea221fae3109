#include "slhoi/mat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace slhoi {

Mat matmul(const Mat& a, const Mat& b) {
  assert(a.cols() == b.rows());
  Mat out(a.rows(), b.cols(), 0.0);
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    double* out_row = out.row(i);
    const double* a_row = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = a_row[p];
      if (av == 0.0) continue;
      const double* b_row = b.row(p);
      for (int j = 0; j < m; ++j) out_row[j] += av * b_row[j];
    }
  }
  return out;
}

Mat transposed(const Mat& a) {
  Mat out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  assert(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mat_checksum(const Mat& m, std::uint64_t seed) {
  // Entries are hashed as little-endian 8-byte words so the checksum is a
  // stable function of the values, not of platform padding.
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::uint64_t w;
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    std::memcpy(&w, &m.data()[i], sizeof(w));
    unsigned char le[8];
    for (int b = 0; b < 8; ++b) le[b] = static_cast<unsigned char>((w >> (8 * b)) & 0xff);
    h = fnv1a64(le, 8, h);
  }
  return h;
}

}  // namespace slhoi
