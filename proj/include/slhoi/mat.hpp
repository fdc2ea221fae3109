#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace slhoi {

// Dense row-major matrix of doubles. All model math runs in 64-bit; 32-bit
// only appears at the archive/bank boundary.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    assert(rows >= 0 && cols >= 0);
  }

  static Mat from_list(int rows, int cols, std::initializer_list<double> vals) {
    Mat m(rows, cols);
    assert(vals.size() == m.data_.size());
    std::size_t i = 0;
    for (double v : vals) m.data_[i++] = v;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(0.0); }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Mat matmul(const Mat& a, const Mat& b);
Mat transposed(const Mat& a);

// Max of |a - b| over all entries; shapes must match.
double max_abs_diff(const Mat& a, const Mat& b);

// FNV-1a over the little-endian byte image of the entries.
std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t mat_checksum(const Mat& m, std::uint64_t seed = 14695981039346656037ull);

}  // namespace slhoi
