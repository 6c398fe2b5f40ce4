#include "mig/templates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mig/error.hpp"
#include "mig/field.hpp"

namespace mig {

int template_width(int width) {
    int w = static_cast<int>(std::lround(7.0 * width / 128.0));
    w = std::max(w, 5);
    if (w % 2 == 0)
        ++w;
    return w;
}

double CornerTemplate::halfplane_sdf(int j, Vec2 p) const {
    return dot(p - corner.position, normals[j]);
}

double CornerTemplate::composed_target(std::size_t k) const {
    return corner.convex ? std::min(targets[0][k], targets[1][k]) : std::max(targets[0][k], targets[1][k]);
}

CornerTemplate build_template(const Corner &corner, int width, double gamma) {
    if (std::abs(corner.tangent_in.length() - 1.0) > 1e-9 || std::abs(corner.tangent_out.length() - 1.0) > 1e-9)
        throw ContractViolation("corner tangents must be unit length");
    CornerTemplate t;
    t.corner = corner;
    t.size = template_width(width);
    t.spacing = 2.0 / width;

    // Half-plane j contains the ink side of edge j. For a convex corner the other edge lies on
    // that side; for a concave corner it lies on the opposite side.
    double sign = corner.convex ? 1.0 : -1.0;
    Vec2 n_in = perp(corner.tangent_in);
    if (dot(corner.tangent_out, n_in) * sign < 0.0)
        n_in = -n_in;
    Vec2 n_out = perp(corner.tangent_out);
    if (dot(-corner.tangent_in, n_out) * sign < 0.0)
        n_out = -n_out;
    t.normals = {n_in, n_out};

    int r = (t.size - 1) / 2;
    for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) {
            Vec2 p = corner.position + Vec2{j * t.spacing, i * t.spacing};
            if (p.x < -1.0 || p.x > 1.0 || p.y < -1.0 || p.y > 1.0) {
                ++t.clipped;
                continue;
            }
            bool a = t.halfplane_sdf(0, p) >= 0.0;
            bool b = t.halfplane_sdf(1, p) >= 0.0;
            Quadrant q = a && b ? Quadrant::Q1 : a ? Quadrant::Q2 : b ? Quadrant::Q3 : Quadrant::Q4;
            t.points.push_back(p);
            t.quadrants.push_back(q);
        }
    retarget(t, gamma);
    return t;
}

void retarget(CornerTemplate &tmpl, double gamma) {
    tmpl.gamma = gamma;
    for (int j = 0; j < 2; ++j) {
        tmpl.targets[j].resize(tmpl.points.size());
        for (std::size_t k = 0; k < tmpl.points.size(); ++k)
            tmpl.targets[j][k] = kernel(tmpl.halfplane_sdf(j, tmpl.points[k]), gamma);
    }
}

CornerLoss corner_loss(std::span<const std::array<double, 3>> predictions, const CornerTemplate &tmpl) {
    if (predictions.size() != tmpl.points.size())
        throw ContractViolation("corner_loss: predictions must match the template window");
    static constexpr std::array<std::array<int, 2>, 6> kAssignments{
        {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}}};

    CornerLoss out;
    out.gradient.assign(predictions.size(), {0.0, 0.0, 0.0});
    for (std::size_t k = 0; k < predictions.size(); ++k)
        out.supervised_points += tmpl.supervised(k);
    if (out.supervised_points == 0)
        return out;

    double best = std::numeric_limits<double>::infinity();
    for (const auto &asg : kAssignments) {
        double sum = 0.0;
        for (std::size_t k = 0; k < predictions.size(); ++k) {
            if (!tmpl.supervised(k))
                continue;
            double e0 = predictions[k][asg[0]] - tmpl.targets[0][k];
            double e1 = predictions[k][asg[1]] - tmpl.targets[1][k];
            sum += e0 * e0 + e1 * e1;
        }
        if (sum < best) {
            best = sum;
            out.assignment = asg;
        }
    }
    double inv = 1.0 / out.supervised_points;
    out.sum = best;
    out.loss = best * inv;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        if (!tmpl.supervised(k))
            continue;
        for (int j = 0; j < 2; ++j) {
            int c = out.assignment[j];
            out.gradient[k][c] = 2.0 * (predictions[k][c] - tmpl.targets[j][k]) * inv;
        }
    }
    return out;
}

} // namespace mig
