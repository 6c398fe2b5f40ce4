#include <doctest.h>

#include <algorithm>
#include <array>
#include <map>
#include <numbers>
#include <random>

#include "mig/error.hpp"
#include "mig/field.hpp"
#include "mig/geometry.hpp"
#include "mig/templates.hpp"

using namespace mig;

namespace {

// Ink in the first quadrant: the outline runs down the y axis and then out along the x axis.
Corner right_angle() {
    Corner c;
    c.position = {0, 0};
    c.tangent_in = {0, -1};
    c.tangent_out = {1, 0};
    c.interior_angle = std::numbers::pi / 2;
    c.convex = true;
    return c;
}

Vec2 rot90(Vec2 p) { return {-p.y, p.x}; }

std::map<Quadrant, int> counts(const CornerTemplate &t) {
    std::map<Quadrant, int> m;
    for (auto q : t.quadrants)
        ++m[q];
    return m;
}

std::vector<std::array<double, 3>> random_predictions(std::size_t n, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::array<double, 3>> p(n);
    for (auto &v : p)
        v = {u(rng), u(rng), u(rng)};
    return p;
}

double brute_force_loss(const std::vector<std::array<double, 3>> &pred, const CornerTemplate &t) {
    double best = 1e300;
    int supervised = 0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            if (a == b)
                continue;
            double s = 0.0;
            supervised = 0;
            for (std::size_t k = 0; k < pred.size(); ++k) {
                if (t.quadrants[k] != Quadrant::Q2 && t.quadrants[k] != Quadrant::Q3)
                    continue;
                ++supervised;
                s += (pred[k][a] - t.targets[0][k]) * (pred[k][a] - t.targets[0][k]) +
                     (pred[k][b] - t.targets[1][k]) * (pred[k][b] - t.targets[1][k]);
            }
            best = std::min(best, s);
        }
    return best / supervised;
}

const Corner &concave_corner(const std::vector<Corner> &corners) {
    return *std::find_if(corners.begin(), corners.end(), [](const Corner &c) { return !c.convex; });
}

} // namespace

TEST_SUITE("templates") {

TEST_CASE("template width scales with resolution") {
    CHECK(template_width(128) == 7);
    CHECK(template_width(64) == 5);
    CHECK(template_width(32) == 5);
    CHECK(template_width(256) == 15);
    CHECK(template_width(1024) == 57);
    for (int w = 16; w <= 2048; w *= 2)
        CHECK(template_width(w) % 2 == 1);
}

TEST_CASE("quadrant counts for an axis-aligned right angle") {
    auto t = build_template(right_angle(), 128, 4.0 / 128);
    REQUIRE(t.points.size() == 49);
    auto m = counts(t);
    CHECK(m[Quadrant::Q1] == 16);
    CHECK(m[Quadrant::Q2] == 12);
    CHECK(m[Quadrant::Q3] == 12);
    CHECK(m[Quadrant::Q4] == 9);
    CHECK(t.clipped == 0);
    // Independent enumeration over grid offsets -3..3.
    for (std::size_t k = 0; k < t.points.size(); ++k) {
        bool x = t.points[k].x >= 0, y = t.points[k].y >= 0;
        Quadrant expect = x && y ? Quadrant::Q1 : x ? Quadrant::Q2 : y ? Quadrant::Q3 : Quadrant::Q4;
        CHECK(t.quadrants[k] == expect);
    }
}

TEST_CASE("half-plane targets") {
    const double g = 4.0 / 128;
    auto t = build_template(right_angle(), 128, g);
    for (std::size_t k = 0; k < t.points.size(); ++k) {
        Vec2 p = t.points[k];
        CHECK(t.targets[1][k] == kernel(p.y, g));
        if (p.y >= g)
            CHECK(t.targets[1][k] == 1.0);
        if (p.y == 0.0)
            CHECK(t.targets[1][k] == 0.5);
    }
}

TEST_CASE("quadrants rotate with the corner") {
    Corner c = right_angle();
    auto base = build_template(c, 128, 4.0 / 128);
    Corner r = c;
    r.tangent_in = rot90(c.tangent_in);
    r.tangent_out = rot90(c.tangent_out);
    for (int turn = 1; turn <= 3; ++turn) {
        auto t = build_template(r, 128, 4.0 / 128);
        REQUIRE(t.points.size() == base.points.size());
        for (std::size_t k = 0; k < base.points.size(); ++k) {
            Vec2 q = base.points[k];
            for (int i = 0; i < turn; ++i)
                q = rot90(q);
            auto it = std::find_if(t.points.begin(), t.points.end(),
                                   [&](Vec2 p) { return (p - q).length() < 1e-12; });
            REQUIRE(it != t.points.end());
            CHECK(t.quadrants[it - t.points.begin()] == base.quadrants[k]);
        }
        r.tangent_in = rot90(r.tangent_in);
        r.tangent_out = rot90(r.tangent_out);
    }
}

TEST_CASE("composed target reproduces the convex wedge") {
    auto sq = parse_path("M -0.5 -0.5 L 0.5 -0.5 L 0.5 0.5 L -0.5 0.5 Z");
    auto corners = detect_corners(sq);
    const double g = 4.0 / 128;
    for (const auto &c : corners) {
        auto t = build_template(c, 128, g);
        double err = 0.0;
        for (std::size_t k = 0; k < t.points.size(); ++k) {
            if (t.quadrants[k] == Quadrant::Q4)
                continue;
            err = std::max(err, std::abs(t.composed_target(k) - kernel(glyph_sdf(t.points[k], sq), g)));
            if (t.supervised(k))
                CHECK(t.composed_target(k) <= 0.5);
        }
        CHECK(err <= 1e-6);
    }
}

TEST_CASE("concave corner composes to ink on Q2 and Q3") {
    auto l = normalize(load_glyph_file(std::string(MIG_TEST_DATA) + "/shapes/l_polygon.path"));
    const double g = 4.0 / 128;
    auto corners = detect_corners(l);
    auto t = build_template(concave_corner(corners), 128, g);
    auto m = counts(t);
    CHECK(m[Quadrant::Q2] + m[Quadrant::Q3] > 0);
    double err = 0.0;
    for (std::size_t k = 0; k < t.points.size(); ++k) {
        if (t.supervised(k)) {
            CHECK(t.composed_target(k) >= 0.5);
            double far = std::max(t.halfplane_sdf(0, t.points[k]), t.halfplane_sdf(1, t.points[k]));
            if (far >= g)
                CHECK(t.composed_target(k) == 1.0);
        }
        if (t.quadrants[k] != Quadrant::Q1)
            err = std::max(err, std::abs(t.composed_target(k) - kernel(glyph_sdf(t.points[k], l), g)));
    }
    CHECK(err <= 1e-6);
}

TEST_CASE("window points outside the domain are clipped") {
    Corner c = right_angle();
    c.position = {-1.0 + 1.0 / 128, -1.0 + 1.0 / 128};
    auto t = build_template(c, 128, 4.0 / 128);
    CHECK(t.points.size() == 16);
    CHECK(t.clipped == 33);
    CHECK(t.quadrants.size() == t.points.size());
    CHECK(t.targets[0].size() == t.points.size());
}

TEST_CASE("non-unit tangents are rejected") {
    Corner c = right_angle();
    c.tangent_in = {0, -2};
    CHECK_THROWS_AS(build_template(c, 128, 0.1), ContractViolation);
}

TEST_CASE("exact targets give zero loss in any channel order") {
    auto t = build_template(right_angle(), 128, 4.0 / 128);
    std::vector<std::array<double, 3>> pred(t.points.size());
    for (std::size_t k = 0; k < pred.size(); ++k)
        pred[k] = {0.123, t.targets[1][k], t.targets[0][k]};
    auto r = corner_loss(pred, t);
    CHECK(r.loss == 0.0);
    CHECK(r.assignment == std::array{2, 1});
    CHECK(r.supervised_points == 24);
}

TEST_CASE("loss is permutation invariant and matches brute force") {
    std::mt19937_64 rng(21);
    auto l = normalize(load_glyph_file(std::string(MIG_TEST_DATA) + "/shapes/l_polygon.path"));
    for (const auto &c : detect_corners(l)) {
        auto t = build_template(c, 128, 4.0 / 128);
        auto pred = random_predictions(t.points.size(), rng);
        double base = corner_loss(pred, t).loss;
        CHECK(base == doctest::Approx(brute_force_loss(pred, t)).epsilon(1e-14));
        std::array<int, 3> perm{0, 1, 2};
        while (std::next_permutation(perm.begin(), perm.end())) {
            auto p = pred;
            for (std::size_t k = 0; k < p.size(); ++k)
                p[k] = {pred[k][perm[0]], pred[k][perm[1]], pred[k][perm[2]]};
            CHECK(corner_loss(p, t).loss == base);
        }
    }
}

TEST_CASE("constant half prediction") {
    auto t = build_template(right_angle(), 128, 4.0 / 128);
    std::vector<std::array<double, 3>> pred(t.points.size(), {0.5, 0.5, 0.5});
    double expect = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < t.points.size(); ++k)
        if (t.supervised(k)) {
            expect += (0.5 - t.targets[0][k]) * (0.5 - t.targets[0][k]) +
                      (0.5 - t.targets[1][k]) * (0.5 - t.targets[1][k]);
            ++n;
        }
    CHECK(corner_loss(pred, t).loss == doctest::Approx(expect / n).epsilon(1e-15));
    CHECK(corner_loss(pred, t).loss == doctest::Approx(brute_force_loss(pred, t)).epsilon(1e-15));
}

TEST_CASE("loss gradient matches finite differences") {
    std::mt19937_64 rng(4);
    auto t = build_template(right_angle(), 128, 4.0 / 128);
    auto pred = random_predictions(t.points.size(), rng);
    auto r = corner_loss(pred, t);
    const double h = 1e-7;
    for (std::size_t k = 0; k < pred.size(); k += 3)
        for (int c = 0; c < 3; ++c) {
            auto p = pred, m = pred;
            p[k][c] += h;
            m[k][c] -= h;
            double fd = (corner_loss(p, t).loss - corner_loss(m, t).loss) / (2 * h);
            CHECK(fd == doctest::Approx(r.gradient[k][c]).epsilon(1e-6));
        }
}

TEST_CASE("mismatched prediction count is a contract violation") {
    auto t = build_template(right_angle(), 128, 0.1);
    std::vector<std::array<double, 3>> pred(3);
    CHECK_THROWS_AS(corner_loss(pred, t), ContractViolation);
}

}
