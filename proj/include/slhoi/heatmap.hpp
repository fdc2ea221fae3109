#pragma once

#include <filesystem>

#include "slhoi/image_io.hpp"
#include "slhoi/mat.hpp"

namespace slhoi {

// Slices one attention row down to its patch-key block, renormalizes it to
// sum 1, and reshapes to the patch grid.
Mat attention_to_grid(const Mat& row, int patch_begin, int patch_end, int grid_rows,
                      int grid_cols);

// Bilinear resampling of grid cell centers to an arbitrary pixel resolution.
Mat upsample_bilinear(const Mat& grid, int out_h, int out_w);

// Black -> red -> yellow -> white ramp over values scaled by the grid max.
Image colorize(const Mat& values);

// alpha * heatmap + (1 - alpha) * base, heatmap upsampled to the base size.
Image overlay_heatmap(const Image& base, const Mat& grid, double alpha);

// Red marker (white border) centered on one patch cell of an image whose
// pixels are cell_px per grid step.
void mark_patch(Image& img, int patch_row, int patch_col, int cell_px);

void save_heatmap_files(const std::filesystem::path& prefix, const Mat& grid,
                        const Image& base, int marked_row, int marked_col, int cell_px);

}  // namespace slhoi
