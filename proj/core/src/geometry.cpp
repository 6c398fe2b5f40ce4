#include "mig/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mig/error.hpp"

namespace mig {

namespace {

constexpr int kMaxDegree = 5;

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

double horner(std::span<const double> a, double t) {
    double r = 0.0;
    for (std::size_t i = a.size(); i-- > 0;)
        r = r * t + a[i];
    return r;
}

using Bernstein = std::array<double, kMaxDegree + 1>;

int sign_changes(const Bernstein &b, int n) {
    int changes = 0;
    int last = 0;
    for (int i = 0; i <= n; ++i) {
        int s = (b[i] > 0.0) - (b[i] < 0.0);
        if (s == 0)
            continue;
        if (last != 0 && s != last)
            ++changes;
        last = s;
    }
    return changes;
}

void isolate(std::span<const double> power, const Bernstein &b, int n, double lo, double hi, int depth,
             std::vector<double> &roots) {
    int changes = sign_changes(b, n);
    if (changes == 0) {
        if (b[0] == 0.0)
            roots.push_back(lo);
        if (b[n] == 0.0)
            roots.push_back(hi);
        return;
    }
    if (changes == 1 && b[0] != 0.0 && b[n] != 0.0) {
        // Exactly one simple root in (lo, hi): bisect on the original polynomial.
        double a = lo, c = hi;
        double fa = horner(power, a);
        if ((fa > 0.0) == (horner(power, c) > 0.0)) {
            // Bernstein signs and direct evaluation disagree only at roundoff level.
            roots.push_back(0.5 * (a + c));
            return;
        }
        for (int it = 0; it < 200 && c - a > 1e-15; ++it) {
            double m = 0.5 * (a + c);
            double fm = horner(power, m);
            if (fm == 0.0) {
                a = c = m;
                break;
            }
            if ((fm > 0.0) == (fa > 0.0)) {
                a = m;
                fa = fm;
            } else {
                c = m;
            }
        }
        roots.push_back(0.5 * (a + c));
        return;
    }
    if (hi - lo < 1e-12 || depth > 64) {
        roots.push_back(0.5 * (lo + hi));
        return;
    }
    // de Casteljau split at the midpoint.
    Bernstein left{}, right{}, work = b;
    for (int level = 0; level <= n; ++level) {
        left[level] = work[0];
        right[n - level] = work[n - level];
        for (int i = 0; i < n - level; ++i)
            work[i] = 0.5 * (work[i] + work[i + 1]);
    }
    double mid = 0.5 * (lo + hi);
    isolate(power, left, n, lo, mid, depth + 1, roots);
    isolate(power, right, n, mid, hi, depth + 1, roots);
}

// Power-basis coefficients of a segment, lowest order first.
std::array<Vec2, 4> power_coefficients(const Segment &s) {
    const auto &p = s.points;
    switch (s.kind) {
    case SegmentKind::Line:
        return {p[0], p[1] - p[0], Vec2{}, Vec2{}};
    case SegmentKind::Quadratic:
        return {p[0], (p[1] - p[0]) * 2.0, p[0] - p[1] * 2.0 + p[2], Vec2{}};
    case SegmentKind::Cubic:
        return {p[0], (p[1] - p[0]) * 3.0, (p[0] - p[1] * 2.0 + p[2]) * 3.0, p[3] - p[0] + (p[1] - p[2]) * 3.0};
    }
    return {};
}

double squared_distance(Vec2 p, const Segment &s, double t) {
    return (s.point(t) - p).squared_length();
}

Vec2 second_derivative(const Segment &s, double t) {
    const auto &p = s.points;
    switch (s.kind) {
    case SegmentKind::Line:
        return {};
    case SegmentKind::Quadratic:
        return (p[0] - p[1] * 2.0 + p[2]) * 2.0;
    case SegmentKind::Cubic:
        return (p[0] - p[1] * 2.0 + p[2]) * (6.0 * (1.0 - t)) + (p[1] - p[2] * 2.0 + p[3]) * (6.0 * t);
    }
    return {};
}

NearestPoint line_distance(Vec2 p, Vec2 a, Vec2 b) {
    Vec2 ab = b - a;
    double len2 = ab.squared_length();
    double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    return {(a + ab * t - p).length(), t};
}

} // namespace

std::vector<double> polynomial_roots_unit(std::span<const double> coefficients) {
    std::vector<double> roots;
    if (coefficients.empty())
        return roots;
    int n = static_cast<int>(coefficients.size()) - 1;
    if (n > kMaxDegree)
        throw ContractViolation("polynomial_roots_unit supports degree <= 5");
    if (n == 0) {
        if (coefficients[0] == 0.0)
            roots = {0.0, 1.0};
        return roots;
    }
    Bernstein b{};
    for (int i = 0; i <= n; ++i) {
        double sum = 0.0;
        for (int k = 0; k <= i; ++k)
            sum += binomial(i, k) / binomial(n, k) * coefficients[k];
        b[i] = sum;
    }
    isolate(coefficients, b, n, 0.0, 1.0, 0, roots);
    std::sort(roots.begin(), roots.end());
    std::vector<double> unique;
    for (double r : roots)
        if (unique.empty() || r - unique.back() > 1e-12)
            unique.push_back(r);
    return unique;
}

NearestPoint segment_distance(Vec2 p, const Segment &s) {
    if (s.kind == SegmentKind::Line)
        return line_distance(p, s.points[0], s.points[1]);

    // Stationary points of |q(t)|^2 with q = s(t) - p: roots of q(t) . q'(t).
    auto a = power_coefficients(s);
    a[0] -= p;
    int d = s.degree();
    std::array<double, 2 * 3> g{};
    for (int i = 0; i <= d; ++i)
        for (int k = 1; k <= d; ++k) {
            Vec2 dk = a[k] * static_cast<double>(k);
            g[i + k - 1] += dot(a[i], dk);
        }
    std::vector<double> candidates = polynomial_roots_unit(std::span<const double>(g.data(), 2 * d));
    for (double &t : candidates) {
        // Newton polish on the stationarity condition.
        for (int it = 0; it < 4; ++it) {
            Vec2 q = s.point(t) - p;
            Vec2 d1 = s.derivative(t);
            double f = dot(q, d1);
            double fp = d1.squared_length() + dot(q, second_derivative(s, t));
            if (fp <= 0.0)
                break;
            double next = std::clamp(t - f / fp, 0.0, 1.0);
            if (squared_distance(p, s, next) > squared_distance(p, s, t))
                break;
            t = next;
        }
    }
    candidates.push_back(0.0);
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());

    NearestPoint best{std::numeric_limits<double>::infinity(), 0.0};
    double best_d2 = std::numeric_limits<double>::infinity();
    for (double t : candidates) {
        double d2 = squared_distance(p, s, t);
        if (d2 < best_d2) {
            best_d2 = d2;
            best.t = t;
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

namespace {

// Signed crossings of the rightward horizontal ray from p with one segment.
int segment_crossings(Vec2 p, const Segment &s) {
    int n = s.point_count();
    double min_y = s.points[0].y, max_y = s.points[0].y, max_x = s.points[0].x;
    for (int i = 1; i < n; ++i) {
        min_y = std::min(min_y, s.points[i].y);
        max_y = std::max(max_y, s.points[i].y);
        max_x = std::max(max_x, s.points[i].x);
    }
    if (p.y < min_y || p.y > max_y || p.x >= max_x)
        return 0;

    auto a = power_coefficients(s);
    std::array<double, 4> ya{a[0].y, a[1].y, a[2].y, a[3].y};
    std::array<double, 4> xa{a[0].x, a[1].x, a[2].x, a[3].x};
    int d = s.degree();

    // Split into y-monotone pieces at the roots of y'(t).
    std::vector<double> cuts{0.0};
    if (d >= 2) {
        std::array<double, 3> dy{};
        for (int k = 1; k <= d; ++k)
            dy[k - 1] = k * ya[k];
        for (double r : polynomial_roots_unit(std::span<const double>(dy.data(), d)))
            if (r > 0.0 && r < 1.0)
                cuts.push_back(r);
    }
    cuts.push_back(1.0);

    std::span<const double> yspan(ya.data(), d + 1);
    std::span<const double> xspan(xa.data(), d + 1);
    int winding = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double t0 = cuts[i], t1 = cuts[i + 1];
        double y0 = i == 0 ? s.start().y : horner(yspan, t0);
        double y1 = i + 2 == cuts.size() ? s.end().y : horner(yspan, t1);
        int dir = 0;
        if (y0 <= p.y && p.y < y1)
            dir = 1;
        else if (y1 <= p.y && p.y < y0)
            dir = -1;
        if (dir == 0)
            continue;
        double lo = t0, hi = t1;
        if (d == 1) {
            lo = hi = (p.y - y0) / (y1 - y0);
        } else {
            // y is monotone on [t0, t1]; keep the invariant y(lo) <= p.y < y(hi) (or mirrored).
            for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
                double m = 0.5 * (lo + hi);
                double ym = horner(yspan, m);
                bool below = dir > 0 ? ym <= p.y : ym > p.y;
                if (below)
                    lo = m;
                else
                    hi = m;
            }
        }
        double x = horner(xspan, 0.5 * (lo + hi));
        if (x > p.x)
            winding += dir;
    }
    return winding;
}

} // namespace

int winding_number(Vec2 p, std::span<const Contour> contours) {
    int w = 0;
    for (const auto &c : contours)
        for (const auto &s : c.segments)
            w += segment_crossings(p, s);
    return w;
}

double glyph_sdf(Vec2 p, std::span<const Contour> contours) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto &c : contours)
        for (const auto &s : c.segments)
            best = std::min(best, segment_distance(p, s).distance);
    return winding_number(p, contours) != 0 ? best : -best;
}

namespace {

// Whether the filled region lies to the left (perp side) of the contour's direction of travel.
bool ink_on_left(const Contour &contour, std::span<const Contour> all) {
    const Segment *longest = &contour.segments.front();
    double best = -1.0;
    for (const auto &s : contour.segments) {
        double len = (s.end() - s.start()).squared_length() + (s.point(0.5) - s.start()).squared_length();
        if (len > best) {
            best = len;
            longest = &s;
        }
    }
    Vec2 mid = longest->point(0.5);
    Vec2 normal = perp(normalized(longest->derivative(0.5)));
    return winding_number(mid + normal * 1e-7, all) != 0;
}

} // namespace

std::vector<Corner> detect_corners(std::span<const Contour> contours, double threshold) {
    if (!(threshold > 0.0 && threshold < M_PI))
        throw ContractViolation("corner threshold must lie in (0, pi)");
    std::vector<Corner> corners;
    for (std::size_t ci = 0; ci < contours.size(); ++ci) {
        const auto &segs = contours[ci].segments;
        if (segs.empty())
            continue;
        for (std::size_t si = 0; si < segs.size(); ++si)
            if (segs[si].start_tangent().squared_length() == 0.0)
                throw DegenerateInputError("zero-length tangent on contour " + std::to_string(ci) + " segment " +
                                           std::to_string(si));
        bool left = ink_on_left(contours[ci], contours);
        for (std::size_t si = 0; si < segs.size(); ++si) {
            const Segment &in = segs[si];
            const Segment &out = segs[(si + 1) % segs.size()];
            Vec2 tin = in.end_tangent();
            Vec2 tout = out.start_tangent();
            double angle = std::acos(std::clamp(dot(-tin, tout), -1.0, 1.0));
            if (!(angle < threshold))
                continue;
            Corner c;
            c.position = in.end();
            c.tangent_in = tin;
            c.tangent_out = tout;
            c.interior_angle = angle;
            c.convex = (cross(tin, tout) > 0.0) == left;
            c.contour = static_cast<int>(ci);
            c.segment = static_cast<int>(si);
            corners.push_back(c);
        }
    }
    return corners;
}

} // namespace mig
