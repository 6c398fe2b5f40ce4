#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mig/field.hpp"
#include "mig/grid_io.hpp"
#include "mig/network.hpp"
#include "mig/templates.hpp"
#include "mig/trainer.hpp"

namespace mig {

struct RenderOptions {
    double aa_k = kDefaultAaK;
    Supervision supervision = Supervision::Sdf;
    int threads = 1;
    bool keep_channels = false;  // also return the raw per-channel outputs
};

struct Render {
    Image image;        // composed opacity in [0,1]
    Image median;       // per-pixel median of the raw channels (the SDF in Sdf mode)
    FloatGrid channels; // raw channel outputs, only with keep_channels
};

/// Evaluates the network at all width x width pixel centers, takes the channel median and
/// applies the kernel with gamma = aa_k / width (Pixel mode: clamps the median opacity instead).
Render render_implicit(const Network &net, std::span<const double> latent, int label, int width,
                       const RenderOptions &options = {});

/// Bilinear resampling (clamp to edge) of each stored channel to width x width, then median and kernel.
Render render_bilateral(const FloatGrid &grid, int width, const RenderOptions &options = {});

/// Mean squared difference. Throws ContractViolation on a dimension mismatch.
double mse(const Image &a, const Image &b);

/// sum(a*b) / sum(clip(a+b, 0, 1)); 1 when both images are all zero.
double soft_iou(const Image &a, const Image &b);

/// Union of the template windows scaled to a width x width image: a pixel is in the mask when its
/// center lies inside the window's square footprint.
Image corner_region_mask(std::span<const CornerTemplate> templates, int width);

struct RegionMetrics {
    bool has_corners = false;  // false: empty mask, metrics undefined
    double mse = 0.0;
    double siou = 0.0;
    int pixels = 0;
};

/// mse and soft_iou restricted to pixels where mask >= 0.5.
RegionMetrics masked_metrics(const Image &a, const Image &b, const Image &mask);

RegionMetrics corner_region_metrics(const Image &a, const Image &b, std::span<const CornerTemplate> templates);

/// Closed polyline in domain coordinates; the last point connects back to the first.
using Polyline = std::vector<Vec2>;

/// Marching squares on the 0-level of a grid sampled at pixel centers (positive inside).
/// The grid is surrounded by negative values so every contour closes. Saddle cells cut off the
/// corners whose sign differs from the cell-center average.
std::vector<Polyline> extract_zero_level(const Image &grid);

/// [[[x, y], ...], ...]
std::string contours_to_json(const std::vector<Polyline> &contours);

/// Mean absolute 5-point Laplacian over interior pixels, in units of the pixel pitch 2 / width.
double laplacian_smoothness(const Image &grid);

/// Binary PGM (P5, maxval 255) with value round(clamp(v, 0, 1) * 255).
std::vector<unsigned char> encode_pgm(const Image &image);
Image decode_pgm(const std::vector<unsigned char> &bytes, const std::string &what = "image");
void write_pgm(const std::filesystem::path &path, const Image &image);
Image read_pgm(const std::filesystem::path &path);

/// 2x2 box filter (width and height must be even).
Image downsample2(const Image &image);

} // namespace mig
