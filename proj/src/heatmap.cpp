#include "slhoi/heatmap.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "slhoi/errors.hpp"

namespace slhoi {

Mat attention_to_grid(const Mat& row, int patch_begin, int patch_end, int grid_rows,
                      int grid_cols) {
  assert(row.rows() == 1);
  if (patch_end - patch_begin != grid_rows * grid_cols) {
    throw DataError("attention patch block does not match the " + std::to_string(grid_rows) +
                    "x" + std::to_string(grid_cols) + " grid");
  }
  if (patch_begin < 0 || patch_end > row.cols()) {
    throw DataError("attention row shorter than the requested patch block");
  }
  double sum = 0.0;
  for (int i = patch_begin; i < patch_end; ++i) sum += row(0, i);
  if (sum <= 0.0) throw NumericalError("attention row sums to zero over patch keys");
  Mat grid(grid_rows, grid_cols);
  for (int r = 0; r < grid_rows; ++r) {
    for (int c = 0; c < grid_cols; ++c) {
      grid(r, c) = row(0, patch_begin + r * grid_cols + c) / sum;
    }
  }
  return grid;
}

Mat upsample_bilinear(const Mat& grid, int out_h, int out_w) {
  Mat out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    // Sample positions map pixel centers onto grid-cell centers.
    double gy = (y + 0.5) / out_h * grid.rows() - 0.5;
    gy = std::clamp(gy, 0.0, static_cast<double>(grid.rows() - 1));
    const int y0 = static_cast<int>(std::floor(gy));
    const int y1 = std::min(y0 + 1, grid.rows() - 1);
    const double fy = gy - y0;
    for (int x = 0; x < out_w; ++x) {
      double gx = (x + 0.5) / out_w * grid.cols() - 0.5;
      gx = std::clamp(gx, 0.0, static_cast<double>(grid.cols() - 1));
      const int x0 = static_cast<int>(std::floor(gx));
      const int x1 = std::min(x0 + 1, grid.cols() - 1);
      const double fx = gx - x0;
      out(y, x) = (1 - fy) * ((1 - fx) * grid(y0, x0) + fx * grid(y0, x1)) +
                  fy * ((1 - fx) * grid(y1, x0) + fx * grid(y1, x1));
    }
  }
  return out;
}

namespace {

void hot_color(double v, double& r, double& g, double& b) {
  v = std::clamp(v, 0.0, 1.0);
  r = std::clamp(3.0 * v, 0.0, 1.0);
  g = std::clamp(3.0 * v - 1.0, 0.0, 1.0);
  b = std::clamp(3.0 * v - 2.0, 0.0, 1.0);
}

double grid_max(const Mat& m) {
  double mx = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) mx = std::max(mx, m.data()[i]);
  return mx > 0.0 ? mx : 1.0;
}

}  // namespace

Image colorize(const Mat& values) {
  const double mx = grid_max(values);
  Image img(values.rows(), values.cols());
  for (int y = 0; y < values.rows(); ++y) {
    for (int x = 0; x < values.cols(); ++x) {
      double r, g, b;
      hot_color(values(y, x) / mx, r, g, b);
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  }
  return img;
}

Image overlay_heatmap(const Image& base, const Mat& grid, double alpha) {
  const Mat up = upsample_bilinear(grid, base.height, base.width);
  const double mx = grid_max(up);
  Image out(base.height, base.width);
  for (int y = 0; y < base.height; ++y) {
    for (int x = 0; x < base.width; ++x) {
      double r, g, b;
      hot_color(up(y, x) / mx, r, g, b);
      out.at(y, x, 0) = alpha * r + (1 - alpha) * base.at(y, x, 0);
      out.at(y, x, 1) = alpha * g + (1 - alpha) * base.at(y, x, 1);
      out.at(y, x, 2) = alpha * b + (1 - alpha) * base.at(y, x, 2);
    }
  }
  return out;
}

void mark_patch(Image& img, int patch_row, int patch_col, int cell_px) {
  const int cy = patch_row * cell_px + cell_px / 2;
  const int cx = patch_col * cell_px + cell_px / 2;
  const int radius = std::max(2, cell_px / 6);
  for (int y = cy - radius - 1; y <= cy + radius + 1; ++y) {
    for (int x = cx - radius - 1; x <= cx + radius + 1; ++x) {
      if (y < 0 || y >= img.height || x < 0 || x >= img.width) continue;
      const int dy = y - cy, dx = x - cx;
      const int d2 = dy * dy + dx * dx;
      if (d2 <= radius * radius) {
        img.at(y, x, 0) = 1.0;
        img.at(y, x, 1) = 0.0;
        img.at(y, x, 2) = 0.0;
      } else if (d2 <= (radius + 1) * (radius + 1)) {
        img.at(y, x, 0) = 1.0;
        img.at(y, x, 1) = 1.0;
        img.at(y, x, 2) = 1.0;
      }
    }
  }
}

void save_heatmap_files(const std::filesystem::path& prefix, const Mat& grid,
                        const Image& base, int marked_row, int marked_col, int cell_px) {
  write_ppm(prefix.string() + "_raw.ppm", colorize(grid));
  Image over = overlay_heatmap(base, grid, 0.55);
  if (marked_row >= 0 && marked_col >= 0) mark_patch(over, marked_row, marked_col, cell_px);
  write_ppm(prefix.string() + "_overlay.ppm", over);
}

}  // namespace slhoi
