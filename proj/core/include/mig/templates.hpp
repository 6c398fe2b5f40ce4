#pragma once

#include <array>
#include <span>
#include <vector>

#include "mig/geometry.hpp"
#include "mig/vec2.hpp"

namespace mig {

enum class Quadrant : unsigned char { Q1 = 1, Q2 = 2, Q3 = 3, Q4 = 4 };

/// Window side length in pixels for an image `width` pixels across: 7 at 128, scaled
/// linearly, at least 5 and always odd.
int template_width(int width);

/// Local supervision around one corner: two half-planes whose boundaries follow the two
/// edges meeting at the corner. Window points are spaced one pixel apart and centred on the corner.
struct CornerTemplate {
    Corner corner;
    int size = 0;            // window side in points
    double spacing = 0.0;    // pixel pitch 2 / width
    double gamma = 0.0;      // anti-alias range used for the targets
    std::array<Vec2, 2> normals{};  // unit normals; half-plane j is dot(p - corner, normals[j]) >= 0
    std::vector<Vec2> points;       // window points inside [-1,1]^2, row-major
    std::vector<Quadrant> quadrants;
    std::array<std::vector<double>, 2> targets;  // K(half-plane sdf) per point
    int clipped = 0;         // window points dropped for leaving the domain

    double halfplane_sdf(int j, Vec2 p) const;
    /// median(T1, T2, 0) for convex corners, median(T1, T2, 1) for concave ones.
    double composed_target(std::size_t k) const;
    bool supervised(std::size_t k) const { return quadrants[k] == Quadrant::Q2 || quadrants[k] == Quadrant::Q3; }
};

CornerTemplate build_template(const Corner &corner, int width, double gamma);

/// Recomputes the soft targets for a new anti-alias range (geometry unchanged).
void retarget(CornerTemplate &tmpl, double gamma);

struct CornerLoss {
    double loss = 0.0;
    std::array<int, 2> assignment{0, 1};           // predicted channel matched to target 1 / target 2
    std::vector<std::array<double, 3>> gradient;  // d loss / d prediction, per window point
    int supervised_points = 0;
    double sum = 0.0;  // un-normalized squared error under the best assignment
};

/// Permutation-invariant local loss: on Q2 u Q3 points, the best injective assignment of the two
/// targets to the three predicted channels, averaged over supervised points.
CornerLoss corner_loss(std::span<const std::array<double, 3>> predictions, const CornerTemplate &tmpl);

} // namespace mig
