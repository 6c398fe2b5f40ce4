#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mig/glyph.hpp"
#include "mig/vec2.hpp"

namespace mig {

/// Default anti-alias multiplier: gamma = aa_k / width.
inline constexpr double kDefaultAaK = 4.0;

/// Smooth opacity kernel. 1 for d >= gamma, 0 for d <= -gamma, cubic 1/2 + (3t - t^3)/4 in between.
/// Throws ContractViolation for gamma <= 0.
double kernel(double d, double gamma);
/// dK/dd.
double kernel_derivative(double d, double gamma);

/// Anti-alias half-width for an image `width` pixels across the [-1,1] domain.
inline double aa_range(double aa_k, int width) { return aa_k / width; }

/// Pixel center of column j (x) or row i (y) on an n-pixel axis over [-1, 1].
inline double pixel_center(int index, int n) { return (index + 0.5) / n * 2.0 - 1.0; }

enum class TrainComposer { Mean, MedianPair };

/// Composed value plus the partial derivative with respect to every channel.
struct Composed {
    double value = 0.0;
    std::array<double, 3> grad{};
};

/// Median of 1 or 3 channels (identity for one channel).
double compose_median(std::span<const double> channels);

/// Differentiable training surrogate of the median. MedianPair averages the median with its
/// nearest other value; equidistant neighbours resolve to the smaller value.
Composed compose_train(std::span<const double> channels, TrainComposer mode);

/// Row-major single- or multi-channel raster. Row i holds y = pixel_center(i, height).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    double &at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
    std::size_t size() const { return values.size(); }
};

/// Analytic signed distance at every pixel center of a width x width grid.
Image sdf_grid(std::span<const Contour> contours, int width, int threads = 1);

/// Applies the kernel to every entry of an SDF grid.
Image apply_kernel(const Image &sdf, double gamma);

/// K(glyph_sdf(p)) at every pixel center of a width x width image.
Image rasterize_ground_truth(std::span<const Contour> contours, int width, double gamma, int threads = 1);

} // namespace mig
