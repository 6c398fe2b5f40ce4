#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mig/field.hpp"
#include "mig/glyph.hpp"
#include "mig/templates.hpp"

namespace mig {

enum class SampleKind : unsigned char { Edge, Corner, Homogeneous };

struct FieldSample {
    Vec2 position{};
    SampleKind kind = SampleKind::Edge;
    double target = 0.0;
    int corner_ref = -1;    // template index for corner samples
    int window_index = -1;  // point index inside that template
};

struct SamplingConfig {
    double gamma = 4.0 / 64.0;
    double homogeneous_ratio = 0.25;
    int min_homogeneous = 64;  // floor so glyphs without edges still get samples
    std::uint64_t seed = 0;
};

struct SampleSet {
    std::vector<FieldSample> samples;
    std::uint64_t seed = 0;
    int edge_count = 0;
    int corner_count = 0;
    int homogeneous_count = 0;
};

/// Importance sampling over a ground-truth raster: every pixel of each 3x3 neighbourhood around an
/// anti-aliased pixel, every template window point, and round(ratio * edges) homogeneous points.
/// Throws ConfigError when a non-empty glyph yields no anti-aliased pixel.
SampleSet sample_glyph(std::span<const Contour> contours, const Image &raster,
                       std::span<const CornerTemplate> templates, const SamplingConfig &config);

} // namespace mig
