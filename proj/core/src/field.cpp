#include "mig/field.hpp"

#include <algorithm>
#include <cmath>

#include "mig/error.hpp"
#include "mig/geometry.hpp"
#include "mig/parallel.hpp"

namespace mig {

double kernel(double d, double gamma) {
    if (!(gamma > 0.0))
        throw ContractViolation("anti-alias range must be positive");
    if (d >= gamma)
        return 1.0;
    if (d <= -gamma)
        return 0.0;
    double t = d / gamma;
    return 0.5 + (3.0 * t - t * t * t) * 0.25;
}

double kernel_derivative(double d, double gamma) {
    if (!(gamma > 0.0))
        throw ContractViolation("anti-alias range must be positive");
    if (d >= gamma || d <= -gamma)
        return 0.0;
    double t = d / gamma;
    return 3.0 * (1.0 - t * t) / (4.0 * gamma);
}

namespace {

std::array<int, 3> sorted_order(std::span<const double> c) {
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return c[a] < c[b] || (c[a] == c[b] && a < b); });
    return order;
}

void check_channels(std::span<const double> c) {
    if (c.size() != 1 && c.size() != 3)
        throw ContractViolation("composition expects 1 or 3 channels");
}

} // namespace

double compose_median(std::span<const double> channels) {
    check_channels(channels);
    if (channels.size() == 1)
        return channels[0];
    const double a = channels[0], b = channels[1], c = channels[2];
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

Composed compose_train(std::span<const double> channels, TrainComposer mode) {
    check_channels(channels);
    Composed out;
    if (channels.size() == 1) {
        out.value = channels[0];
        out.grad[0] = 1.0;
        return out;
    }
    if (mode == TrainComposer::Mean) {
        out.value = (channels[0] + channels[1] + channels[2]) / 3.0;
        out.grad = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        return out;
    }
    auto order = sorted_order(channels);
    int lo = order[0], mid = order[1], hi = order[2];
    double below = channels[mid] - channels[lo];
    double above = channels[hi] - channels[mid];
    int near = above < below ? hi : lo;
    out.value = 0.5 * (channels[mid] + channels[near]);
    out.grad[mid] += 0.5;
    out.grad[near] += 0.5;
    return out;
}

Image sdf_grid(std::span<const Contour> contours, int width, int threads) {
    Image img(width, width);
    parallel_for(static_cast<std::size_t>(width), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double y = pixel_center(static_cast<int>(i), width);
            for (int j = 0; j < width; ++j)
                img.at(static_cast<int>(i), j) = glyph_sdf({pixel_center(j, width), y}, contours);
        }
    });
    return img;
}

Image apply_kernel(const Image &sdf, double gamma) {
    Image out = sdf;
    for (double &v : out.values)
        v = kernel(v, gamma);
    return out;
}

Image rasterize_ground_truth(std::span<const Contour> contours, int width, double gamma, int threads) {
    return apply_kernel(sdf_grid(contours, width, threads), gamma);
}

} // namespace mig
