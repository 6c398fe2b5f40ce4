#pragma once

#include <span>
#include <vector>

#include "mig/glyph.hpp"
#include "mig/vec2.hpp"

namespace mig {

/// Corner threshold used for glyph training: 3 rad (about 171 degrees).
inline constexpr double kDefaultCornerThreshold = 3.0;

struct NearestPoint {
    double distance = 0.0;
    double t = 0.0;
};

/// Global minimum of |p - s(t)| over t in [0,1]; ties resolve to the smallest t.
NearestPoint segment_distance(Vec2 p, const Segment &s);

/// Nonzero-rule winding number of the contours around p.
int winding_number(Vec2 p, std::span<const Contour> contours);

/// Exact signed distance, positive inside (nonzero winding), negative outside.
double glyph_sdf(Vec2 p, std::span<const Contour> contours);

struct Corner {
    Vec2 position{};
    Vec2 tangent_in{};   // direction of travel arriving at the corner
    Vec2 tangent_out{};  // direction of travel leaving the corner
    double interior_angle = 0.0;  // angle between -tangent_in and tangent_out
    bool convex = true;  // the ink occupies the narrow wedge
    int contour = 0;
    int segment = 0;  // index of the incoming segment
};

/// Emits a Corner at every segment junction whose interior angle is below `threshold` radians.
/// Throws DegenerateInputError for a segment with no defined tangent.
std::vector<Corner> detect_corners(std::span<const Contour> contours, double threshold = kDefaultCornerThreshold);

/// Roots of a polynomial (power-basis coefficients, lowest order first) inside [0,1],
/// isolated by Bernstein subdivision. Sorted ascending.
std::vector<double> polynomial_roots_unit(std::span<const double> coefficients);

} // namespace mig
