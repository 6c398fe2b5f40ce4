#pragma once

// Independent reference implementations used by the unit and acceptance tests. None of these
// call into the library's geometry, network or metric code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mig/glyph.hpp"
#include "mig/network.hpp"
#include "mig/vec2.hpp"

namespace oracle {

using mig::Vec2;

inline Vec2 bezier(const mig::Segment &s, double t) {
    // Repeated linear interpolation, independent of the library's Bernstein evaluation.
    Vec2 p[4];
    int n = s.point_count();
    for (int i = 0; i < n; ++i)
        p[i] = s.points[i];
    for (int r = n - 1; r > 0; --r)
        for (int i = 0; i < r; ++i)
            p[i] = p[i] * (1.0 - t) + p[i + 1] * t;
    return p[0];
}

struct Nearest {
    double distance;
    double t;
};

/// Dense parameter sweep (`samples` uniform t values) followed by golden-section refinement
/// around the best sample.
inline Nearest sweep_nearest(Vec2 p, const mig::Segment &s, int samples = 100000) {
    auto dist = [&](double t) { return (bezier(s, t) - p).length(); };
    int best = 0;
    double best_d = dist(0.0);
    for (int i = 1; i <= samples; ++i) {
        double d = dist(static_cast<double>(i) / samples);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    double lo = std::max(0.0, (best - 1.0) / samples), hi = std::min(1.0, (best + 1.0) / samples);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    for (int it = 0; it < 200; ++it) {
        if (dist(a) < dist(b))
            hi = b;
        else
            lo = a;
        a = hi - g * (hi - lo);
        b = lo + g * (hi - lo);
    }
    double t = 0.5 * (lo + hi);
    Nearest r{dist(t), t};
    if (best_d < r.distance)
        r = {best_d, static_cast<double>(best) / samples};
    return r;
}

/// Even-odd crossing test against the polygon formed by the segment endpoints (valid for
/// line-only outlines, where even-odd and nonzero agree for simple non-nested shapes and holes).
inline bool inside_polygon(Vec2 p, const std::vector<mig::Contour> &contours) {
    bool in = false;
    for (const auto &c : contours)
        for (const auto &s : c.segments) {
            Vec2 a = s.start(), b = s.end();
            if ((a.y > p.y) != (b.y > p.y)) {
                double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (p.x < x)
                    in = !in;
            }
        }
    return in;
}

constexpr double kFar = 1e12;  // far above any squared pixel distance on the grids used

/// 1D squared Euclidean distance transform (Felzenszwalb-Huttenlocher lower envelope).
/// Non-site entries of f hold kFar.
inline void edt_1d(const double *f, double *d, int n, int stride_f, int stride_d) {
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    auto F = [&](int q) { return f[static_cast<std::size_t>(q) * stride_f]; };
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((F(q) + double(q) * q) - (F(v[k]) + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((F(q) + double(q) * q) - (F(v[k]) + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q)
            ++k;
        d[static_cast<std::size_t>(q) * stride_d] = double(q - v[k]) * (q - v[k]) + F(v[k]);
    }
}

/// Signed distance at the pixel centers of an n x n grid over [-1,1]^2, computed as the Euclidean
/// distance transform to the set of boundary pixels (pixels with a 4-neighbour on the other side).
/// Row-major, row i at y = pixel center i; positive inside; units of the domain.
inline std::vector<double> edt_signed_distance(const std::vector<mig::Contour> &contours, int n) {
    auto center = [n](int i) { return (i + 0.5) / n * 2.0 - 1.0; };
    std::vector<unsigned char> in(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            in[static_cast<std::size_t>(i) * n + j] = inside_polygon({center(j), center(i)}, contours);
    std::vector<double> f(in.size(), kFar);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            bool v = in[static_cast<std::size_t>(i) * n + j];
            bool edge = (i > 0 && in[static_cast<std::size_t>(i - 1) * n + j] != v) ||
                        (i + 1 < n && in[static_cast<std::size_t>(i + 1) * n + j] != v) ||
                        (j > 0 && in[static_cast<std::size_t>(i) * n + j - 1] != v) ||
                        (j + 1 < n && in[static_cast<std::size_t>(i) * n + j + 1] != v);
            if (edge)
                f[static_cast<std::size_t>(i) * n + j] = 0.0;
        }
    std::vector<double> tmp(f.size());
    for (int j = 0; j < n; ++j)
        edt_1d(f.data() + j, tmp.data() + j, n, n, n);
    std::vector<double> out(f.size());
    for (int i = 0; i < n; ++i)
        edt_1d(tmp.data() + static_cast<std::size_t>(i) * n, out.data() + static_cast<std::size_t>(i) * n, n, 1, 1);
    const double pitch = 2.0 / n;
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = (in[k] ? 1.0 : -1.0) * std::sqrt(out[k]) * pitch;
    return out;
}

/// Straight-line re-evaluation of the MLP from its documented flat parameter layout.
inline std::vector<double> mlp_forward(const mig::Network &net, int label, std::span<const double> z, Vec2 p) {
    const auto &s = net.shape();
    std::vector<double> input(static_cast<std::size_t>(s.input_dim()), 0.0);
    input[0] = p.x;
    input[1] = p.y;
    input[2 + label] = 1.0;
    for (int i = 0; i < s.latent_dim; ++i)
        input[2 + s.labels + i] = z[i];
    auto params = net.parameters();
    std::vector<double> h = input;
    std::size_t offset = 0;
    for (int k = 0; k <= s.hidden_layers; ++k) {
        std::vector<double> x = h;
        if (k > 0 && k == s.skip_layer)
            x.insert(x.end(), input.begin(), input.end());
        int rows = k == s.hidden_layers ? s.outputs : s.hidden_width;
        int cols = static_cast<int>(x.size());
        std::vector<double> y(rows, 0.0);
        for (int r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (int c = 0; c < cols; ++c)
                acc += params[offset + static_cast<std::size_t>(c) * rows + r] * x[c];
            acc += params[offset + static_cast<std::size_t>(rows) * cols + r];
            y[r] = (k == s.hidden_layers || acc > 0.0) ? acc : 0.01 * acc;
        }
        offset += static_cast<std::size_t>(rows) * (cols + 1);
        h = std::move(y);
    }
    return h;
}

inline double mse(const std::vector<double> &a, const std::vector<double> &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / a.size();
}

inline double soft_iou(const std::vector<double> &a, const std::vector<double> &b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        double u = a[i] + b[i];
        den += u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
    }
    return den == 0.0 ? 1.0 : num / den;
}

/// ||a - b|| / (||a|| + ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double> &a, const std::vector<double> &b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double den = std::sqrt(na) + std::sqrt(nb);
    return den == 0.0 ? 0.0 : std::sqrt(diff) / den;
}

} // namespace oracle
